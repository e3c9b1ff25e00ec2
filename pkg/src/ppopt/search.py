"""Best-first synthesis of phase-polynomial blocks.

The search state is a joint parity matrix (see :mod:`ppopt.parity`).  Each edge
is one CNOT; weight-1 phase columns are completed with an Rz as soon as they
appear.  Nodes are ordered by ``(f, h1, h2, -g, seq)`` with ``f = g + h1 + h2``.
The queue is capped, and goal states (no phase columns left) are finished by
Gaussian elimination and collected until enough solutions are found.

Merged blocks carry several versions of a line.  Only the current version of
each line is an active row.  A version retires (its barrier gate is emitted) as
soon as its row and its output column are both reduced to the unit vector.
"""

from __future__ import annotations

import heapq
import logging
import time
from dataclasses import dataclass, field
from functools import lru_cache

from .angles import Angle
from .ir import PhaseBlock, SimState, build_block, merge_rotations, partition_levels
from .parity import bits, gaussian_finish_rows, ge_cost, gf2_solve, popcount, single_bits
from .qasm import Circuit, Gate, cx, rz, x
from .verify import ssa_equivalent

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EngineConfig:
    queue_capacity: int = 10_000
    solution_count: int = 10_000
    per_block_timeout: float = 400.0
    # merged groups only look for an improvement over their separately
    # synthesized blocks, so they get a fixed expansion budget
    group_expansions: int = 5_000

    def __post_init__(self):
        if min(self.queue_capacity, self.solution_count, self.per_block_timeout, self.group_expansions) <= 0:
            raise ValueError("engine limits must be positive")


@dataclass
class BlockStats:
    expanded: int = 0
    dropped: int = 0
    solutions: int = 0
    wall_time: float = 0.0
    timed_out: bool = False
    fallback: bool = False
    best_at: int = 0  # expansions done when the returned solution was found


@dataclass
class SearchNode:
    rows: tuple[int, ...]
    live: int
    active: int
    current: int  # bitmask of active rows (current version of each line)
    g: int
    h1: int
    h2: int
    seq: int
    parent: SearchNode | None = None
    ops: tuple = ()

    @property
    def f(self) -> int:
        return self.g + self.h1 + self.h2

    def priority(self) -> tuple:
        return (self.f, self.h1, self.h2, -self.g, self.seq)

    def key(self) -> tuple:
        return (self.rows, self.live, self.active, self.current)

    def path_ops(self) -> list:
        out = []
        node = self
        while node is not None:
            out.append(node.ops)
            node = node.parent
        return [op for ops in reversed(out) for op in ops]


class BlockProblem:
    """Static data for one block: matrix layout, versions and helpers."""

    def __init__(self, block: PhaseBlock):
        self.block = block
        self.n = block.width
        self.P = len(block.phase_terms)
        self.angles = tuple(a for _, a in block.phase_terms)
        self.lines = [s.original for s in block.ssa_qubits]
        self.final = 0
        self.successor = {}
        for i in range(self.n):
            nxt = block.next_version(i)
            if nxt is None:
                self.final |= 1 << i
            else:
                self.successor[i] = nxt
        self.phase_mask = (1 << self.P) - 1
        self.merged = block.is_merged

        rows = [0] * self.n
        for k, (par, _) in enumerate(block.phase_terms):
            for r in bits(par):
                rows[r] |= 1 << k
        for j, par in enumerate(block.output_map):
            for r in bits(par):
                rows[r] |= 1 << (self.P + j)
        self.rows0 = tuple(rows)
        self.nonfinal = sorted(self.successor)
        self.current0 = sum(1 << i for i, s in enumerate(block.ssa_qubits) if s.version == 0)

    # -- state transitions ------------------------------------------------

    def settle(self, rows, live, current, touched=None):
        """Complete weight-1 columns and retire finished versions until stable.

        ``touched`` limits the first completion scan to columns that changed.
        """
        ops = []
        completed = False
        rows = list(rows)
        mask = live if touched is None else touched & live
        while True:
            single = single_bits(rows, mask) if mask else 0
            if single:
                done = 0
                for k in bits(single):
                    bit = 1 << k
                    r = 0
                    while not rows[r] & bit:
                        r += 1
                    if current >> r & 1:
                        done |= bit
                        ops.append(("rz", r, k))
                if done:
                    rows = [v & ~done for v in rows]
                    live &= ~done
                    completed = True
            if not self.merged:
                return tuple(rows), live, current, ops, completed
            retired = False
            for p in self.nonfinal:
                if not current >> p & 1:
                    continue
                unit = 1 << (self.P + p)
                if rows[p] != unit or any(rows[i] & unit for i in range(self.n) if i != p):
                    continue
                current = (current & ~(1 << p)) | (1 << self.successor[p])
                ops.append(("ret", p))
                retired = True
            if not retired:
                return tuple(rows), live, current, ops, completed
            mask = live

    def heuristics(self, rows, live, current) -> tuple[int, int]:
        h1 = sum(popcount(r & live) for r in rows)
        out = tuple(r >> self.P for r in rows)
        if self.merged:
            h2 = _windowed_cost(out, current, self.final, self._succ_tuple())
        else:
            h2 = ge_cost(out)
        return h1, h2

    def lower_bound(self, rows, live, current) -> int:
        """CNOTs still needed, counted as rows that must change.

        A CNOT rewrites one row.  Every current row whose output part is not
        its unit vector must change, and a column of weight ``w`` needs at
        least ``w - 1`` of its holders to change.
        """
        P = self.P
        wrong = 0
        for p in bits(current):
            if rows[p] >> P != 1 << p:
                wrong |= 1 << p
        extra = 0
        if live:
            rest = [r & live for i, r in enumerate(rows) if not wrong >> i & 1]
            for k in bits(live):
                w = sum(r >> k & 1 for r in rest)
                if w - 1 > extra:
                    extra = w - 1
        return popcount(wrong) + extra

    def _succ_tuple(self):
        return tuple(self.successor.get(i, -1) for i in range(self.n))

    def finish(self, rows, current):
        """Ops that complete a state with no live phase columns, or None."""
        out = tuple(r >> self.P for r in rows)
        if not self.merged:
            return [("cx", i, j) for i, j in gaussian_finish_rows(out)]
        res = windowed_finish(out, current, self.final, self._succ_tuple())
        return None if res is None else res

    def retire_moves(self, rows, current):
        """Multi-CNOT moves that let one pending version retire right away."""
        out = []
        for p in bits(current & ~self.final):
            plan = _retire_plan(rows, p, current, 1 << (self.P + p))
            if plan is not None and plan[1]:
                out.append(tuple(plan[1]))
        return out

    def row_pairs(self, rows, cols, current):
        act = list(bits(current))
        return [(i, j) for i in act for j in act if i != j and rows[i] & rows[j] & cols]

    # -- gate emission ----------------------------------------------------

    def to_gates(self, ops) -> list[Gate]:
        blk = self.block
        out = []
        for op in ops:
            if op[0] == "cx":
                out.append(cx(self.lines[op[1]], self.lines[op[2]]))
            elif op[0] == "rz":
                out.append(rz(self.lines[op[1]], self.angles[op[2]]))
            else:
                p = op[1]
                if blk.affine[p]:
                    out.append(x(self.lines[p]))
                out.append(blk.barrier_gates[p])
        for p in bits(self.final):
            if blk.affine[p]:
                out.append(x(self.lines[p]))
        return out


# -- windowed finish for merged blocks ----------------------------------------


def windowed_finish(out, current, final, succ):
    """Retire every non-final version, then eliminate the final rows.

    ``out`` holds the output part of each row.  A current non-final row ``p``
    can retire once column ``p`` is the unit vector ``e_p`` (only rows on the
    current versions may be used) and row ``p`` equals ``e_p``.  Rows are
    retired greedily, cheapest first.  Returns the op list or None when stuck.
    """
    rows = list(out)
    ops = []
    while True:
        pending = list(bits(current & ~final))
        if not pending:
            break
        best = None
        for p in pending:
            plan = _retire_plan(rows, p, current)
            if plan is not None and (best is None or len(plan[1]) < len(best[2])):
                best = (p, plan[0], plan[1])
        if best is None:
            return None
        p, rows, mv = best
        ops += [("cx", i, j) for i, j in mv]
        ops.append(("ret", p))
        current = (current & ~(1 << p)) | (1 << succ[p])
    try:
        mv = _ge_subset(rows, final)
    except ValueError:
        return None
    ops += [("cx", i, j) for i, j in mv]
    return ops


def _retire_plan(rows, p, current, unit=None):
    """CNOTs that make row ``p`` and column ``unit`` both equal to the unit vector.

    Only current rows take part.  Returns (new rows, moves) or None.
    """
    if unit is None:
        unit = 1 << p
    holders = [r for r in range(len(rows)) if rows[r] & unit]
    if any(not (current >> r & 1) for r in holders):
        return None
    rows = list(rows)
    mv = []
    if not rows[p] & unit:
        cands = [s for s in holders if s != p]
        if not cands:
            return None
        s = min(cands, key=lambda s: (popcount(rows[p] ^ rows[s]), s))
        rows[p] ^= rows[s]
        mv.append((p, s))
    for r in range(len(rows)):
        if r != p and rows[r] & unit:
            rows[r] ^= rows[p]
            mv.append((r, p))
    others = [s for s in bits(current) if s != p]
    sol = gf2_solve([rows[s] for s in others], rows[p] ^ unit)
    if sol is None:
        return None
    for k in sol:
        s = others[k]
        rows[p] ^= rows[s]
        mv.append((p, s))
    return rows, mv


def _ge_subset(rows, mask):
    """Gaussian elimination restricted to the rows/columns in ``mask``."""
    idx = list(bits(mask))
    sub = []
    for i in idx:
        v = 0
        for k, j in enumerate(idx):
            if rows[i] >> j & 1:
                v |= 1 << k
        if rows[i] & ~mask:
            raise ValueError("final row depends on a retired column")
        sub.append(v)
    mv = gaussian_finish_rows(tuple(sub))
    return [(idx[a], idx[b]) for a, b in mv]


@lru_cache(maxsize=200_000)
def _windowed_cost(out, current, final, succ) -> int:
    res = windowed_finish(out, current, final, succ)
    if res is None:
        # no greedy completion from here; penalize but keep the node
        return 2 * len(out) * len(out)
    return sum(1 for op in res if op[0] == "cx")


# -- the search ---------------------------------------------------------------


@dataclass
class SynthesisResult:
    gates: list[Gate]
    cnot_count: int
    stats: BlockStats = field(default_factory=BlockStats)


def synthesize_block(block: PhaseBlock, cfg: EngineConfig = EngineConfig(),
                     bound: int | None = None, stats: BlockStats | None = None,
                     max_expansions: int | None = None, improve_only: bool = False) -> SynthesisResult | None:
    """Search for a short CNOT+Rz realization of ``block``.

    Only ``block.source`` is synthesized; leading and trailing barriers are left
    to the caller.  ``bound`` prunes every path that already uses at least that
    many CNOTs.  With ``improve_only`` nodes are also pruned when the
    admissible :meth:`BlockProblem.lower_bound` shows they cannot beat the
    incumbent.  Returns None if no solution was found (timeout or bound).
    """
    t0 = time.monotonic()
    prob = BlockProblem(block)
    stats = stats if stats is not None else BlockStats()
    live0 = prob.phase_mask
    rows, live, current, ops, _ = prob.settle(prob.rows0, live0, prob.current0)
    seq = 0
    h1v, h2v = prob.heuristics(rows, live, current)
    root = SearchNode(rows, live, live, current, 0, h1v, h2v, seq, None, tuple(ops))

    best: tuple[int, int, list] | None = None  # (cx, order, ops)
    best_cx = bound if bound is not None else None
    prune = improve_only and bound is not None

    def record(node, extra):
        nonlocal best, best_cx
        cnots = node.g + sum(1 for op in extra if op[0] == "cx")
        stats.solutions += 1
        if best_cx is not None and cnots >= best_cx:
            return
        best = (cnots, stats.solutions, node.path_ops() + list(extra))
        best_cx = cnots
        stats.best_at = stats.expanded

    if root.live == 0:
        extra = prob.finish(root.rows, root.current)
        if extra is not None:
            record(root, extra)
            stats.wall_time = time.monotonic() - t0
            return _result(prob, best, stats)

    heap = [(root.priority(), root)]
    seen = {root.key(): 0}
    deadline = t0 + cfg.per_block_timeout
    cap = cfg.queue_capacity
    batch = max(1, cap // 10)

    while heap and stats.solutions < cfg.solution_count:
        _, node = heapq.heappop(heap)
        if best_cx is not None and node.g + 1 >= best_cx:
            continue
        if seen.get(node.key(), -1) < node.g:
            continue
        if max_expansions is not None and stats.expanded >= max_expansions:
            break
        stats.expanded += 1
        if stats.expanded % 256 == 0 and time.monotonic() > deadline:
            stats.timed_out = True
            break

        pairs = prob.row_pairs(node.rows, node.active, node.current)
        if not pairs:
            pairs = prob.row_pairs(node.rows, node.live, node.current)
        if not pairs:
            act = list(bits(node.current))
            pairs = [(i, j) for i in act for j in act if i != j]

        moves = [((i, j),) for i, j in pairs]
        if prob.merged:
            moves += prob.retire_moves(node.rows, node.current)
        for mv in moves:
            rows = list(node.rows)
            increased = 0
            for i, j in mv:
                increased |= rows[j] & ~rows[i] & node.live
                rows[i] ^= rows[j]
            touched = node.rows[mv[0][1]] if len(mv) == 1 else None
            rows, live, current, ops, completed = prob.settle(rows, node.live, node.current, touched)
            g = node.g + len(mv)
            active = node.active & ~increased & live
            if completed or not active:
                active = live
            ops = tuple(("cx", i, j) for i, j in mv) + tuple(ops)
            if live == 0:
                child = SearchNode(rows, live, active, current, g, 0, 0, 0, node, ops)
                extra = prob.finish(rows, current)
                if extra is not None:
                    record(child, extra)
                    if stats.solutions >= cfg.solution_count:
                        break
                    continue
            if best_cx is not None and g >= best_cx:
                continue
            key = (rows, live, active, current)
            if seen.get(key, 1 << 30) <= g:
                continue
            if prune and g + prob.lower_bound(rows, live, current) >= best_cx:
                continue
            seen[key] = g
            h1v, h2v = prob.heuristics(rows, live, current)
            seq += 1
            child = SearchNode(rows, live, active, current, g, h1v, h2v, seq, node, ops)
            heapq.heappush(heap, (child.priority(), child))

        if len(heap) > cap:
            drop = max(batch, len(heap) - cap)
            heap = heapq.nsmallest(len(heap) - drop, heap)
            heapq.heapify(heap)
            stats.dropped += drop

    stats.wall_time = time.monotonic() - t0
    return _result(prob, best, stats)


def _result(prob, best, stats):
    if best is None:
        return None
    gates = prob.to_gates(best[2])
    # per-block postcondition: the replay must carry the block's exact semantics
    if not ssa_equivalent(gates, prob.block.source):
        log.error("synthesized block failed the equivalence check; using the fallback")
        stats.fallback = True
        return None
    return SynthesisResult(gates, best[0], stats)


# -- rotation-merged replay ---------------------------------------------------


def rotation_merged(block: PhaseBlock) -> list[Gate]:
    """The source gates with equal-parity rotations merged into their first use.

    Rotations whose angles sum to zero disappear.  Valid because all rotations
    in a block are diagonal and commute.
    """
    total = dict(block.phase_terms)
    placed = set()
    gates = []
    lines = sorted({q for g in block.source for q in g.qubits})
    version = {q: 0 for q in lines}
    index = {(s.original, s.version): i for i, s in enumerate(block.ssa_qubits)}
    st = SimState(
        wire={q: 1 << index[(q, 0)] for q in lines if (q, 0) in index},
        aff={q: 0 for q in lines},
        terms={},
        global_phase=Angle.zero(),
    )
    for g in block.source:
        if not g.is_phase:
            q = g.qubits[0]
            version[q] += 1
            st.wire[q], st.aff[q] = 1 << index[(q, version[q])], 0
            gates.append(g)
            continue
        if g.name == "rz":
            q = g.qubits[0]
            p = st.wire[q]
            if p in total and p not in placed:
                placed.add(p)
                a = total[p]
                gates.append(rz(q, -a if st.aff[q] else a))
            continue
        st.apply(g)
        gates.append(g)
    return gates


def gate_cost(gates) -> tuple[int, int]:
    """(total gates, weighted CNOTs) with SWAP counted as 3 CNOTs in both."""
    total = sum(3 if g.name == "swap" else 1 for g in gates)
    cnots = sum(1 for g in gates if g.name == "cx") + 3 * sum(1 for g in gates if g.name == "swap")
    return total, cnots


def best_block_gates(block: PhaseBlock, cfg: EngineConfig, bound=None, label="") -> tuple[list[Gate], BlockStats]:
    """Synthesize ``block.source`` and keep the better of it and the merged replay."""
    replay = rotation_merged(block)
    rcost = gate_cost(replay)
    if bound is None:
        bound = rcost[1] + 1
    res = synthesize_block(block, cfg, bound=bound)
    if res is None:
        stats = BlockStats(fallback=True)
        chosen = replay
    else:
        stats = res.stats
        chosen = res.gates if gate_cost(res.gates) <= rcost else replay
        stats.fallback = chosen is replay
    log.info(
        "block %s: width=%d terms=%d expanded=%d dropped=%d solutions=%d time=%.3fs%s",
        label, block.width, len(block.phase_terms), stats.expanded, stats.dropped,
        stats.solutions, stats.wall_time, " (fallback)" if stats.fallback else "",
    )
    return chosen, stats


# -- whole circuits -----------------------------------------------------------


@dataclass
class OptimizeReport:
    circuit: Circuit
    block_stats: list[BlockStats]
    groups: list[tuple[int, int]]

    @property
    def timed_out(self) -> bool:
        return any(s.timed_out for s in self.block_stats)


def optimize_circuit(c: Circuit, group_size: int = 1, cfg: EngineConfig = EngineConfig()) -> OptimizeReport:
    """Resynthesize every phase-polynomial region of ``c``.

    Blocks are first synthesized one at a time.  With ``group_size`` > 1, runs
    of up to that many consecutive blocks are also merged and synthesized, and a
    dynamic program picks the cheapest segmentation.  Single-block results bound
    the merged searches, so the output is never worse than ``group_size`` 1.
    """
    if group_size < 1:
        raise ValueError("group_size must be positive")
    c = merge_rotations(c, "last")
    part = partition_levels(c)
    nb = len(part.blocks)
    all_stats: list[BlockStats] = []

    single: list[list[Gate]] = []
    for i, gates in enumerate(part.blocks):
        blk = build_block(gates)
        chosen, st = best_block_gates(blk, cfg, label=str(i))
        single.append(blk.leading + chosen + blk.trailing)
        all_stats.append(st)

    # best[j]: cheapest emission of blocks 0..j-1 with the layers in between
    best: list[tuple[tuple[int, int], list[Gate], list[tuple[int, int]]] | None] = [None] * (nb + 1)
    best[0] = ((0, 0), [], [])
    for j in range(1, nb + 1):
        for s in range(max(0, j - group_size), j):
            prev = best[s]
            if s > 0:
                head = prev[1] + part.layers[s - 1]
            else:
                head = []
            seg = _group_gates(part, single, s, j, cfg, all_stats)
            gates = head + seg
            cost = gate_cost(gates)
            if best[j] is None or cost < best[j][0]:
                best[j] = (cost, gates, prev[2] + [(s, j)])
    _, gates, groups = best[nb]
    gates = gates + part.layers[nb - 1] if nb else []
    return OptimizeReport(Circuit(c.qubit_count, gates, c.name), all_stats, groups)


def _group_gates(part, single, s, j, cfg, all_stats):
    unmerged = []
    for i in range(s, j):
        unmerged += single[i]
        if i < j - 1:
            unmerged += part.layers[i]
    if j - s == 1:
        return unmerged
    blk = build_block(part.group(s, j))
    if not blk.is_merged:
        return unmerged
    base = gate_cost(unmerged)
    candidates = [unmerged, blk.leading + rotation_merged(blk) + blk.trailing]
    stats = BlockStats()
    res = synthesize_block(blk, cfg, bound=base[1], stats=stats,
                           max_expansions=cfg.group_expansions, improve_only=True)
    if res is None:
        stats.fallback = True
    else:
        candidates.append(blk.leading + res.gates + blk.trailing)
    all_stats.append(stats)
    best = min(candidates, key=gate_cost)
    log.info("group %d..%d: unmerged %s, merged %s, expanded=%d best_at=%d time=%.3fs",
             s, j - 1, base, gate_cost(best), stats.expanded, stats.best_at, stats.wall_time)
    return best
