import random

import pytest

from helpers import co_opt_original, hadamards, random_circuit, random_phase_circuit
from ppopt.angles import Angle
from ppopt.ir import SsaQubit, build_block, merge_blocks, merge_rotations, partition, partition_levels, simulate
from ppopt.qasm import Circuit, cx, h, rz, x
from ppopt.search import EngineConfig, synthesize_block
from ppopt.verify import canonical_form, ssa_equivalent, unitary_equal

X, Y, Z = 0b001, 0b010, 0b100
T = Angle.exact(1, 4)


def replay_circuit(blocks, n):
    gates = []
    for b in blocks:
        gates += b.replay()
    return Circuit(n, gates)


def test_co_opt_block_terms():
    blocks = partition(co_opt_original())
    assert len(blocks) == 1
    b = blocks[0]
    assert b.phase_terms == [(X | Y, Angle.exact(1, 2)), (Y | Z, T)]
    assert b.output_map == [X, X | Z, X | Y | Z]
    assert b.affine == [0, 0, 0]
    assert not b.is_merged


def test_hadamards_have_no_phase_content():
    blocks = partition(hadamards(3))
    assert all(not b.phase_terms for b in blocks)
    emitted = [g for b in blocks for g in b.replay()]
    assert sorted(g.qubits for g in emitted) == [(0,), (1,), (2,)]


def test_x_sets_affine_bit():
    b = build_block([x(0), cx(0, 1), rz(1, T)])
    assert b.affine == [1, 1]
    assert b.phase_terms == [(X | Y, -T)]
    b = build_block([cx(0, 1), x(1), rz(1, T)])
    assert b.affine == [0, 1]
    # rotation under a flipped parity contributes a negated angle
    assert b.phase_terms == [(X | Y, -T)]


def test_barrier_starts_new_version():
    b = build_block([cx(0, 1), rz(1, T), h(1), rz(1, T), cx(0, 1)])
    assert b.ssa_qubits == [SsaQubit(0, 0), SsaQubit(1, 0), SsaQubit(1, 1)]
    assert b.is_merged
    assert b.barrier_gates == {1: h(1)}
    assert b.dependence() == [(1, 2)]
    assert b.output_map == [X, X | Y, X | Z]
    assert b.is_final == [True, False, True]


def test_leading_and_trailing_barriers():
    b = build_block([h(0), rz(0, T), cx(0, 1), h(1)])
    assert b.leading == [h(0)]
    assert b.trailing == [h(1)]
    assert not b.is_merged


def test_partition_replay_matches_input():
    rng = random.Random(3)
    for _ in range(50):
        c = random_circuit(rng, rng.randint(2, 5), rng.randint(5, 40))
        assert unitary_equal(c, replay_circuit(partition(c), c.qubit_count))
        part = partition_levels(c)
        assert unitary_equal(c, Circuit(c.qubit_count, part.gates()))


def test_barrier_only_splits_its_line():
    c = Circuit(3, [rz(0, T), h(0), rz(0, T), cx(1, 2), rz(2, T)])
    part = partition_levels(c)
    # the second-line work has no dependence on the barrier and stays in block 0
    assert part.blocks[0] == [rz(0, T), cx(1, 2), rz(2, T)]
    assert part.layers[0] == [h(0)]
    assert part.blocks[1] == [rz(0, T)]


def test_phase_only_circuit_is_one_block():
    rng = random.Random(8)
    c = random_phase_circuit(rng, 4, 30)
    blocks = partition(c)
    assert len(blocks) == 1
    st, out = simulate(c.gates, 4)
    assert blocks[0].output_map == out


def test_merge_group_one_is_identity():
    blocks = partition(random_circuit(random.Random(1), 4, 30))
    assert merge_blocks(blocks, 1) == blocks
    with pytest.raises(ValueError):
        merge_blocks(blocks, 0)


def test_merged_block_keeps_semantics():
    rng = random.Random(4)
    for _ in range(30):
        c = random_circuit(rng, rng.randint(2, 5), rng.randint(10, 40))
        blocks = partition(c)
        for k in (2, 3):
            merged = merge_blocks(blocks, k)
            assert len(merged) == -(-len(blocks) // k)
            assert unitary_equal(c, replay_circuit(merged, c.qubit_count))


def test_disjoint_blocks_merge_without_gain():
    a = build_block([cx(0, 1), rz(1, T), cx(0, 1)])
    b = build_block([cx(2, 3), rz(3, T), cx(2, 3)])
    cfg = EngineConfig()
    apart = synthesize_block(a, cfg).cnot_count + synthesize_block(b, cfg).cnot_count
    both = build_block(a.source + b.source)
    assert synthesize_block(both, cfg).cnot_count == apart


def three_blocks():
    """q0^q2 rotated in the first and last blocks, separated by H on q3."""
    b1 = build_block([cx(0, 2), rz(2, T), cx(0, 2), cx(3, 2), rz(2, T), cx(3, 2), h(3)])
    b2 = build_block([cx(3, 2), rz(2, T), cx(3, 2), h(3)])
    b3 = build_block([cx(0, 2), rz(2, T), cx(0, 2), cx(3, 1), rz(1, T), cx(3, 1)])
    return [b1, b2, b3]


def test_shared_term_across_blocks():
    blocks = three_blocks()
    assert [b.trailing for b in blocks] == [[h(3)], [h(3)], []]

    def lines_of(b):
        return {tuple(b.ssa_qubits[i].original for i in range(b.width) if p >> i & 1) for p, _ in b.phase_terms}

    assert (0, 2) in lines_of(blocks[0])
    assert (0, 2) not in lines_of(blocks[1])
    assert (0, 2) in lines_of(blocks[2])


def test_merging_shares_the_repeated_term():
    blocks = three_blocks()
    cfg = EngineConfig()
    apart = sum(synthesize_block(b, cfg).cnot_count for b in blocks)
    assert apart == 10
    (merged,) = merge_blocks(blocks, 3)
    assert merged.width == 6 and len(merged.phase_terms) == 4
    res = synthesize_block(merged, cfg)
    assert res.cnot_count == 8
    assert ssa_equivalent(res.gates, merged.source)
    original = Circuit(4, [g for b in blocks for g in b.replay()])
    emitted = Circuit(4, merged.leading + res.gates + merged.trailing)
    assert unitary_equal(original, emitted)


@pytest.mark.parametrize("place", ["first", "last"])
def test_merge_rotations_preserves_unitary(place):
    rng = random.Random(12)
    for _ in range(60):
        c = random_circuit(rng, rng.randint(2, 5), rng.randint(5, 50))
        m = merge_rotations(c, place)
        assert unitary_equal(c, m)
        assert m.count("rz") <= c.count("rz")
        assert len(m) <= len(c)


def test_merge_rotations_cancels():
    c = Circuit(2, [rz(0, T), cx(1, 0), cx(1, 0), rz(0, -T), h(1)])
    assert merge_rotations(c).gates == [cx(1, 0), cx(1, 0), h(1)]


def test_merge_rotations_stops_at_barrier():
    c = Circuit(1, [rz(0, T), h(0), rz(0, T)])
    assert merge_rotations(c) == c


def test_canonical_form_of_block_source():
    b = partition(co_opt_original())[0]
    assert canonical_form(Circuit(3, b.source)).equivalent(canonical_form(co_opt_original()))
