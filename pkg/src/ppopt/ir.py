"""Phase-polynomial blocks: partitioning, SSA versioning and forward simulation.

A block is a run of {cx, rz, x, swap} gates.  Any other gate is a barrier.  When
several blocks are merged, a barrier on line ``q`` ends the current version of
``q`` and starts a fresh variable, so the merged region is still a single
phase polynomial over the SSA variables.

Parities are Python ints used as bitsets over the block's variables.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .angles import Angle
from .qasm import Circuit, Gate


@dataclass(frozen=True, order=True)
class SsaQubit:
    original: int
    version: int

    def __str__(self) -> str:
        return f"q{self.original}" + "'" * self.version


@dataclass
class PhaseBlock:
    """One synthesizable region.

    Attributes:
        ssa_qubits: The block variables.  Variable ``i`` is bit ``i`` of every
            parity and also row ``i`` of the synthesis matrix.
        phase_terms: Sorted ``(parity, angle)`` pairs with distinct nonzero
            parities and nonzero angles.
        output_map: For each variable, the parity its line must hold when that
            version ends (at its barrier, or at the end of the block).
        affine: Constant bit added to each ``output_map`` entry by X gates.
        barrier_gates: For every non-final variable, the gate that ends it.
        global_phase: Accumulated global phase of the source gates.
        source: The original gates in order (phase gates and interior barriers).
        leading: Barriers that can run before the block (no phase gate on
            their line precedes them inside the group).
        trailing: Barriers emitted after the block.
    """

    ssa_qubits: list[SsaQubit]
    phase_terms: list[tuple[int, Angle]]
    output_map: list[int]
    affine: list[int]
    barrier_gates: dict[int, Gate]
    global_phase: Angle
    source: list[Gate] = field(default_factory=list)
    leading: list[Gate] = field(default_factory=list)
    trailing: list[Gate] = field(default_factory=list)

    @property
    def width(self) -> int:
        return len(self.ssa_qubits)

    @property
    def lines(self) -> list[int]:
        return sorted({s.original for s in self.ssa_qubits})

    @property
    def is_final(self) -> list[bool]:
        return [i not in self.barrier_gates for i in range(self.width)]

    @property
    def is_merged(self) -> bool:
        return bool(self.barrier_gates)

    def next_version(self, var: int) -> int | None:
        """Index of the variable that follows ``var`` on the same line."""
        s = self.ssa_qubits[var]
        nxt = SsaQubit(s.original, s.version + 1)
        for i, t in enumerate(self.ssa_qubits):
            if t == nxt:
                return i
        return None

    def dependence(self) -> list[tuple[int, int]]:
        """Pairs (earlier, later) of variables on the same line."""
        out = []
        for i in self.barrier_gates:
            j = self.next_version(i)
            if j is not None:
                out.append((i, j))
        return out

    def replay(self) -> list[Gate]:
        """The source gates with leading and trailing barriers attached."""
        return self.leading + self.source + self.trailing

    def phase_gate_count(self) -> int:
        return sum(1 for g in self.source if g.is_phase)


# -- forward simulation -------------------------------------------------------


@dataclass
class SimState:
    """Wire values during forward simulation, as parities over variables."""

    wire: dict[int, int]
    aff: dict[int, int]
    terms: dict[int, Angle]
    global_phase: Angle

    def apply(self, g: Gate) -> None:
        if g.name == "cx":
            c, t = g.qubits
            self.wire[t] ^= self.wire[c]
            self.aff[t] ^= self.aff[c]
        elif g.name == "x":
            self.aff[g.qubits[0]] ^= 1
        elif g.name == "swap":
            a, b = g.qubits
            self.wire[a], self.wire[b] = self.wire[b], self.wire[a]
            self.aff[a], self.aff[b] = self.aff[b], self.aff[a]
        elif g.name == "rz":
            q = g.qubits[0]
            theta = g.angle
            if self.aff[q]:
                # rz on (1 - p) is a global phase theta and angle -theta on p
                self.global_phase = self.global_phase + theta
                theta = -theta
            p = self.wire[q]
            self.terms[p] = self.terms.get(p, Angle.zero()) + theta
        else:
            raise ValueError(f"{g.name} is not a phase-polynomial gate")


def _clean_terms(terms: dict[int, Angle]) -> list[tuple[int, Angle]]:
    return sorted((p, a) for p, a in terms.items() if not a.is_zero())


def build_block(gates: list[Gate]) -> PhaseBlock:
    """Build a (possibly merged) block from a gate run.

    Non-phase gates inside ``gates`` act as SSA barriers.  Barriers on a line
    before its first phase gate go to ``leading``; barriers after its last phase
    gate go to ``trailing``.
    """
    first, last = {}, {}
    for k, g in enumerate(gates):
        if g.is_phase:
            for q in g.qubits:
                first.setdefault(q, k)
                last[q] = k

    leading, trailing, body = [], [], []
    for k, g in enumerate(gates):
        if g.is_phase:
            body.append(g)
            continue
        q = g.qubits[0]
        if q not in first or k < first[q]:
            leading.append(g)
        elif k > last[q]:
            trailing.append(g)
        else:
            body.append(g)

    ssa: list[SsaQubit] = []
    index: dict[SsaQubit, int] = {}

    def fresh(q: int, v: int) -> int:
        s = SsaQubit(q, v)
        index[s] = len(ssa)
        ssa.append(s)
        return index[s]

    current = {q: fresh(q, 0) for q in sorted(first)}
    st = SimState(
        wire={q: 1 << v for q, v in current.items()},
        aff={q: 0 for q in current},
        terms={},
        global_phase=Angle.zero(),
    )
    outputs: dict[int, int] = {}
    affine: dict[int, int] = {}
    barriers: dict[int, Gate] = {}
    for g in body:
        if g.is_phase:
            st.apply(g)
            continue
        q = g.qubits[0]
        var = current[q]
        outputs[var], affine[var] = st.wire[q], st.aff[q]
        barriers[var] = g
        current[q] = fresh(q, ssa[var].version + 1)
        st.wire[q], st.aff[q] = 1 << current[q], 0
    for q, var in current.items():
        outputs[var], affine[var] = st.wire[q], st.aff[q]

    return PhaseBlock(
        ssa_qubits=ssa,
        phase_terms=_clean_terms(st.terms),
        output_map=[outputs[i] for i in range(len(ssa))],
        affine=[affine[i] for i in range(len(ssa))],
        barrier_gates=barriers,
        global_phase=st.global_phase,
        source=body,
        leading=leading,
        trailing=trailing,
    )


# -- partitioning -------------------------------------------------------------


@dataclass
class Partition:
    """Blocks by level with the barrier layer that follows each block.

    Emitting ``blocks[0], layers[0], blocks[1], layers[1], ...`` gives a circuit
    equivalent to the input (a topological reordering of its gates).
    """

    qubit_count: int
    blocks: list[list[Gate]]
    layers: list[list[Gate]]

    def gates(self) -> list[Gate]:
        out = []
        for b, layer in zip(self.blocks, self.layers):
            out += b + layer
        return out

    def group(self, start: int, stop: int) -> list[Gate]:
        """Gates of blocks ``start..stop-1`` with the layers between them."""
        out = []
        for i in range(start, stop):
            out += self.blocks[i]
            if i < stop - 1:
                out += self.layers[i]
        return out


def partition_levels(c: Circuit) -> Partition:
    """Assign each phase gate the lowest block index its dependencies allow.

    A phase gate on qubits Q goes to block max(level[q] for q in Q).  A barrier on
    q joins the layer after block level[q] and then bumps level[q].  Barriers
    therefore only split the lines they touch.
    """
    level = [0] * c.qubit_count
    blocks: list[list[Gate]] = [[]]
    layers: list[list[Gate]] = [[]]
    for g in c.gates:
        if g.is_phase:
            k = max(level[q] for q in g.qubits)
            for q in g.qubits:
                level[q] = k
            blocks[k].append(g)
        else:
            q = g.qubits[0]
            layers[level[q]].append(g)
            level[q] += 1
            if level[q] == len(blocks):
                blocks.append([])
                layers.append([])
    return Partition(c.qubit_count, blocks, layers)


def partition(c: Circuit) -> list[PhaseBlock]:
    """Split ``c`` into single (unmerged) blocks, each carrying its barrier layer."""
    part = partition_levels(c)
    out = []
    for gates, layer in zip(part.blocks, part.layers):
        b = build_block(gates)
        b.trailing = b.trailing + layer
        out.append(b)
    return out


def merge_blocks(blocks: list[PhaseBlock], group_size: int) -> list[PhaseBlock]:
    """Fuse consecutive runs of up to ``group_size`` blocks into one block each."""
    if group_size < 1:
        raise ValueError("group_size must be positive")
    if group_size == 1:
        return list(blocks)
    out = []
    for s in range(0, len(blocks), group_size):
        run = blocks[s:s + group_size]
        gates = []
        for b in run[:-1]:
            gates += b.replay()
        gates += run[-1].leading + run[-1].source
        merged = build_block(gates)
        merged.trailing = merged.trailing + run[-1].trailing
        out.append(merged)
    return out


def simulate(gates: list[Gate], qubit_count: int) -> tuple[SimState, list[int]]:
    """Forward-simulate a phase-polynomial gate list on ``qubit_count`` fresh inputs.

    Returns the final state and the output parity of each qubit.
    """
    st = SimState(
        wire={q: 1 << q for q in range(qubit_count)},
        aff={q: 0 for q in range(qubit_count)},
        terms={},
        global_phase=Angle.zero(),
    )
    for g in gates:
        st.apply(g)
    return st, [st.wire[q] for q in range(qubit_count)]


def merge_rotations(c: Circuit, place: str = "first") -> Circuit:
    """Combine Rz gates acting on the same parity anywhere in ``c``.

    Wires are tracked as parities over path variables; every non-phase gate
    starts a fresh variable on its line.  Two Rz gates that see the same parity
    commute into one, so each parity keeps a single Rz (at its first or last
    occurrence, per ``place``) carrying the summed angle.  Zero sums vanish.
    """
    if place not in ("first", "last"):
        raise ValueError("place must be 'first' or 'last'")
    n = c.qubit_count
    wire = [1 << q for q in range(n)]
    aff = [0] * n
    fresh = n
    total: dict[int, Angle] = {}
    where: dict[int, int] = {}
    seen = []  # (index, parity, affine) for each rz
    for i, g in enumerate(c.gates):
        if g.name == "cx":
            a, b = g.qubits
            wire[b] ^= wire[a]
            aff[b] ^= aff[a]
        elif g.name == "x":
            aff[g.qubits[0]] ^= 1
        elif g.name == "swap":
            a, b = g.qubits
            wire[a], wire[b] = wire[b], wire[a]
            aff[a], aff[b] = aff[b], aff[a]
        elif g.name == "rz":
            q = g.qubits[0]
            p = wire[q]
            theta = -g.angle if aff[q] else g.angle
            total[p] = total.get(p, Angle.zero()) + theta
            if place == "last" or p not in where:
                where[p] = i
            seen.append((i, p, aff[q]))
        else:
            for q in g.qubits:
                wire[q] = 1 << fresh
                aff[q] = 0
                fresh += 1
    keep: dict[int, Gate] = {}
    for i, p, a in seen:
        if where[p] == i and not total[p].is_zero():
            theta = total[p]
            keep[i] = Gate("rz", c.gates[i].qubits, -theta if a else theta)
    gates = []
    for i, g in enumerate(c.gates):
        if g.name != "rz":
            gates.append(g)
        elif i in keep:
            gates.append(keep[i])
    return Circuit(n, gates, c.name)
