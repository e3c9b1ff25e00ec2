"""Shared generators for the test suite."""

import random
from importlib import resources

from ppopt.angles import Angle
from ppopt.qasm import Circuit, Gate, cx, h, read_qasm, rz, x

SMALL_SUITE = ["tof_3", "barenco_tof_3", "mod5_4", "tof_4", "tof_5", "barenco_tof_4", "vbe_adder_3"]

EIGHTHS = [Angle.exact(k, 4) for k in range(1, 8)]


def benchmark(name: str) -> Circuit:
    return read_qasm(str(resources.files("ppopt") / "benchmarks" / f"{name}.qasm"))


def random_circuit(rng: random.Random, n: int, size: int, barriers=("h",), p_rz=0.35, p_barrier=0.15) -> Circuit:
    """Random circuit over cx, rz (multiples of pi/4), x and the given barriers."""
    gates: list[Gate] = []
    for _ in range(size):
        u = rng.random()
        if u < p_rz:
            gates.append(rz(rng.randrange(n), rng.choice(EIGHTHS)))
        elif u < p_rz + p_barrier and barriers:
            gates.append(Gate(rng.choice(barriers), (rng.randrange(n),)))
        elif u < p_rz + p_barrier + 0.05:
            gates.append(x(rng.randrange(n)))
        else:
            a, b = rng.sample(range(n), 2)
            gates.append(cx(a, b))
    return Circuit(n, gates)


def random_phase_circuit(rng: random.Random, n: int, size: int) -> Circuit:
    return random_circuit(rng, n, size, barriers=(), p_barrier=0.0)


def toffoli_circuit() -> Circuit:
    from ppopt.qasm import toffoli

    return Circuit(3, toffoli(0, 1, 2), "ccx")


def hadamards(n: int) -> Circuit:
    return Circuit(n, [h(q) for q in range(n)])


def co_opt_original() -> Circuit:
    """Five CNOTs, four rotations; two of the rotations cancel on x."""
    q = Angle.exact
    return Circuit(3, [
        rz(0, q(1, 4)), cx(1, 0), rz(0, q(1, 2)), cx(1, 0), rz(0, q(-1, 4)),
        cx(1, 2), rz(2, q(1, 4)), cx(0, 2), cx(2, 1),
    ])


def co_opt_reduced() -> Circuit:
    """The same map with four CNOTs and two rotations."""
    q = Angle.exact
    return Circuit(3, [cx(1, 2), rz(2, q(1, 4)), cx(0, 1), rz(1, q(1, 2)), cx(2, 1), cx(0, 2)])


def bfs_min_cnots(n: int, terms) -> int:
    """Fewest CNOTs that make every parity in ``terms`` appear on some wire
    and then return all wires to the identity. Plain breadth-first search."""
    from collections import deque

    start = tuple(1 << q for q in range(n))
    need = {p: k for k, p in enumerate(terms)}
    full = (1 << len(terms)) - 1

    def cover(wires, mask):
        for w in wires:
            if w in need:
                mask |= 1 << need[w]
        return mask

    s0 = (start, cover(start, 0))
    dist = {s0: 0}
    queue = deque([s0])
    while queue:
        s = queue.popleft()
        wires, mask = s
        if mask == full and wires == start:
            return dist[s]
        for a in range(n):
            for b in range(n):
                if a == b:
                    continue
                w2 = list(wires)
                w2[b] ^= w2[a]
                w2 = tuple(w2)
                t = (w2, cover(w2, mask))
                if t not in dist:
                    dist[t] = dist[s] + 1
                    queue.append(t)
    raise AssertionError("unreachable")


def ladder_block_gates(n: int, terms, angle=None) -> list[Gate]:
    """Each parity computed by a CNOT ladder, rotated, then uncomputed."""
    angle = angle or Angle.exact(1, 4)
    gates: list[Gate] = []
    for p in terms:
        qs = [q for q in range(n) if p >> q & 1]
        t = qs[-1]
        chain = [cx(q, t) for q in qs[:-1]]
        gates += chain + [rz(t, angle)] + chain[::-1]
    return gates


# criterion number -> [title, passed, details]; filled by the acceptance tests
ACCEPTANCE: dict[int, list] = {}


def record(number: int, title: str, ok: bool, detail: str = "") -> bool:
    entry = ACCEPTANCE.setdefault(number, [title, True, []])
    entry[1] = entry[1] and bool(ok)
    if detail:
        entry[2].append(detail)
    return ok
