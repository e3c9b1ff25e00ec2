"""Coupling-graph-aware synthesis.

The search of :mod:`ppopt.search` is extended with a logical-to-physical
mapping.  Successors are

* adjacent CNOTs that reduce the weight of an active column,
* adjacent CNOTs that shrink the weighted spread of an active column (at most
  :data:`CASE_B_LIMIT` per node),
* SWAPs that bring the qubits of an active column closer (only when no
  adjacent weight-reducing CNOT exists).  A SWAP costs 3.

Distances use node-entry weights: stepping onto a qubit that holds a 1 in the
column costs 1, any other qubit costs 3.
"""

from __future__ import annotations

import heapq
import json
import logging
import time
from dataclasses import dataclass, field
from fractions import Fraction
from functools import lru_cache
from pathlib import Path

import networkx as nx

from .ir import PhaseBlock, build_block, merge_rotations, partition_levels
from .parity import bits, gaussian_finish_rows
from .qasm import Circuit, Gate, cx, rz, swap, x
from .search import BlockProblem, BlockStats, EngineConfig, gate_cost, rotation_merged

log = logging.getLogger(__name__)

CASE_B_LIMIT = 4
INACTIVE_WEIGHT = 3


class TooManyQubits(ValueError):
    pass


class Disconnected(ValueError):
    pass


class CouplingGraph:
    """Undirected connectivity of ``n`` physical qubits."""

    def __init__(self, n: int, edges):
        self.n = n
        self.edges = frozenset(tuple(sorted(e)) for e in edges)
        self.graph = nx.Graph()
        self.graph.add_nodes_from(range(n))
        self.graph.add_edges_from(self.edges)
        if any(a == b or not (0 <= a < n and 0 <= b < n) for a, b in self.edges):
            raise ValueError("edges must join two distinct qubits in range")
        if n and not nx.is_connected(self.graph):
            raise Disconnected("coupling graph is not connected")
        self.dist = dict(nx.all_pairs_shortest_path_length(self.graph))
        self._adj = [frozenset(self.graph.neighbors(q)) for q in range(n)]
        self.is_complete = len(self.edges) == n * (n - 1) // 2
        self._weighted = {}

    @classmethod
    def line(cls, n: int) -> CouplingGraph:
        return cls(n, [(i, i + 1) for i in range(n - 1)])

    @classmethod
    def grid(cls, rows: int, cols: int) -> CouplingGraph:
        edges = []
        for r in range(rows):
            for c in range(cols):
                q = r * cols + c
                if c + 1 < cols:
                    edges.append((q, q + 1))
                if r + 1 < rows:
                    edges.append((q, q + cols))
        return cls(rows * cols, edges)

    @classmethod
    def complete(cls, n: int) -> CouplingGraph:
        return cls(n, [(a, b) for a in range(n) for b in range(a + 1, n)])

    @classmethod
    def from_json(cls, text: str) -> CouplingGraph:
        data = json.loads(text)
        return cls(int(data["n"]), [tuple(e) for e in data["edges"]])

    @classmethod
    def parse(cls, spec: str) -> CouplingGraph:
        """``line:<n>``, ``grid:<r>x<c>``, ``complete:<n>`` or a JSON file path."""
        kind, _, arg = spec.partition(":")
        if kind == "line" and arg:
            return cls.line(int(arg))
        if kind == "complete" and arg:
            return cls.complete(int(arg))
        if kind == "grid" and arg:
            r, c = arg.lower().split("x")
            return cls.grid(int(r), int(c))
        return cls.from_json(Path(spec).read_text(encoding="utf-8"))

    def to_json(self) -> str:
        return json.dumps({"n": self.n, "edges": sorted(list(e) for e in self.edges)})

    def adjacent(self, a: int, b: int) -> bool:
        return b in self._adj[a]

    def shortest_path(self, a: int, b: int) -> list[int]:
        return nx.shortest_path(self.graph, a, b)

    def weighted_from(self, src: int, active: frozenset) -> dict[int, int]:
        """Weighted distances from ``src``; entering an active node costs 1, else 3."""
        key = (src, active)
        hit = self._weighted.get(key)
        if hit is None:
            hit = nx.single_source_dijkstra_path_length(
                self.graph, src, weight=lambda u, v, d: 1 if v in active else INACTIVE_WEIGHT
            )
            self._weighted[key] = hit
        return hit

    def weighted_dist(self, a: int, b: int, active) -> int:
        if a == b:
            raise ValueError("distance needs two distinct qubits")
        active = frozenset(active)
        if b in active and self.adjacent(a, b):
            return 1
        return self.weighted_from(a, active)[b]


def weighted_dist(active, a: int, b: int, g: CouplingGraph) -> int:
    """Weighted distance from ``a`` to ``b`` for a column whose 1s sit on ``active``."""
    return g.weighted_dist(a, b, active)


@dataclass
class Mapping:
    """Logical-to-physical bijection over all physical qubits."""

    l2p: list[int]

    @classmethod
    def identity(cls, n: int) -> Mapping:
        return cls(list(range(n)))

    def __post_init__(self):
        if sorted(self.l2p) != list(range(len(self.l2p))):
            raise ValueError("mapping is not a bijection")

    @property
    def p2l(self) -> list[int]:
        inv = [0] * len(self.l2p)
        for lq, pq in enumerate(self.l2p):
            inv[pq] = lq
        return inv

    def swap_physical(self, a: int, b: int) -> None:
        inv = self.p2l
        la, lb = inv[a], inv[b]
        self.l2p[la], self.l2p[lb] = b, a

    def copy(self) -> Mapping:
        return Mapping(list(self.l2p))


def _swap_tuple(l2p: tuple, a: int, b: int) -> tuple:
    out = list(l2p)
    for lq, pq in enumerate(l2p):
        if pq == a:
            out[lq] = b
        elif pq == b:
            out[lq] = a
    return tuple(out)


# -- costs ----------------------------------------------------------------------


def spread_cost(g: CouplingGraph, S: frozenset) -> Fraction:
    """Sum of weighted distances over ordered pairs of ``S``, divided by |S|-1.

    A column with at most one 1 contributes its weight.
    """
    k = len(S)
    if k <= 1:
        return Fraction(k)
    total = 0
    for a in S:
        for b in S:
            if a != b:
                total += g.weighted_dist(a, b, S)
    return Fraction(total, k - 1)


def min_pair_dist(g: CouplingGraph, S: frozenset) -> int:
    if len(S) < 2:
        return 0
    return min(g.weighted_dist(a, b, S) for a in S for b in S if a != b)


def _column_sets(rows, live, pos):
    sets = {}
    for k in bits(live):
        sets[k] = frozenset(pos[r] for r in range(len(rows)) if rows[r] >> k & 1)
    return sets


def h1_hw(g: CouplingGraph, rows, live, pos) -> Fraction:
    """Hardware phase cost; equals the plain 1-count on complete graphs."""
    return sum((spread_cost(g, S) for S in _column_sets(rows, live, pos).values()), Fraction(0))


def h2_hw(g: CouplingGraph, out_rows, pos) -> int:
    """Weighted distance summed over the Gaussian-elimination CNOTs."""
    moves = _ge_moves(tuple(out_rows))
    block = frozenset(pos)
    return sum(g.weighted_dist(pos[i], pos[j], block) for i, j in moves)


@lru_cache(maxsize=100_000)
def _ge_moves(out_rows):
    return tuple(gaussian_finish_rows(out_rows))


# -- search ---------------------------------------------------------------------


@dataclass
class HwSearchNode:
    rows: tuple
    live: int
    active: int
    l2p: tuple
    g: int
    h1: Fraction
    h2: int
    seq: int
    parent: HwSearchNode | None = None
    gates: tuple = ()

    @property
    def f(self):
        return self.g + self.h1 + self.h2

    def priority(self):
        return (self.f, self.h1, self.h2, -self.g, self.seq)

    def path_gates(self) -> list[Gate]:
        out = []
        node = self
        while node is not None:
            out.append(node.gates)
            node = node.parent
        return [gt for gs in reversed(out) for gt in gs]


@dataclass
class HwResult:
    gates: list[Gate]
    l2p: tuple
    cost: int
    stats: BlockStats = field(default_factory=BlockStats)


def route_cnot(g: CouplingGraph, l2p: tuple, a: int, b: int) -> tuple[list[Gate], tuple]:
    """Gates for CNOT between logical ``a`` and ``b``, moving ``a`` with SWAPs."""
    gates = []
    while not g.adjacent(l2p[a], l2p[b]):
        path = g.shortest_path(l2p[a], l2p[b])
        gates.append(swap(path[0], path[1]))
        l2p = _swap_tuple(l2p, path[0], path[1])
    gates.append(cx(l2p[a], l2p[b]))
    return gates, l2p


def route_gates(g: CouplingGraph, gates, l2p: tuple) -> tuple[list[Gate], tuple]:
    """Place a logical gate list on hardware, inserting SWAPs before far CNOTs."""
    out = []
    for gt in gates:
        if gt.name == "cx":
            gs, l2p = route_cnot(g, l2p, *gt.qubits)
            out += gs
        elif gt.name == "swap":
            a, b = gt.qubits
            # a logical swap is just a relabelling
            la = list(l2p)
            la[a], la[b] = la[b], la[a]
            l2p = tuple(la)
        else:
            out.append(gt.on(*(l2p[q] for q in gt.qubits)))
    return out, l2p


class _HwProblem:
    def __init__(self, block: PhaseBlock, g: CouplingGraph, allow_swaps: bool, search_finish: bool):
        if block.is_merged:
            raise ValueError("hardware synthesis works on unmerged blocks")
        self.base = BlockProblem(block)
        self.block = block
        self.g = g
        self.allow_swaps = allow_swaps
        self.search_finish = search_finish
        self.lines = self.base.lines
        self.n = self.base.n
        self.P = self.base.P
        self.unit = tuple(1 << j for j in range(self.n))

    def pos(self, l2p):
        return [l2p[q] for q in self.lines]

    def heuristics(self, rows, live, l2p):
        pos = self.pos(l2p)
        out = tuple(r >> self.P for r in rows)
        return h1_hw(self.g, rows, live, pos), h2_hw(self.g, out, pos)

    def settle(self, rows, live, l2p):
        rows, live, _, ops, completed = self.base.settle(rows, live, self.base.current0)
        pos = self.pos(l2p)
        gates = tuple(rz(pos[r], self.base.angles[k]) for _, r, k in ops)
        return rows, live, gates, completed

    def moves(self, node: HwSearchNode):
        """Successor moves: ('cx', i, j) on rows or ('swap', a, b) on physical qubits."""
        rows, pos = node.rows, self.pos(node.l2p)
        g = self.g
        n = self.n
        adj = [(i, j) for i in range(n) for j in range(n) if i != j and g.adjacent(pos[i], pos[j])]
        if node.live == 0:
            return [("cx", i, j) for i, j in adj]

        case_a = [(i, j) for i, j in adj if rows[i] & rows[j] & node.active]
        if not case_a:
            case_a = [(i, j) for i, j in adj if rows[i] & rows[j] & node.live]
        chosen = set(case_a)
        out = [("cx", i, j) for i, j in case_a]

        sets = _column_sets(rows, node.active, pos)
        scored = []
        for i, j in adj:
            if (i, j) in chosen:
                continue
            gain = Fraction(0)
            for k, S in sets.items():
                if rows[j] >> k & 1 and not rows[i] >> k & 1:
                    before = spread_cost(g, S)
                    after = spread_cost(g, S | {pos[i]})
                    gain = max(gain, before - after)
            if gain > 0:
                scored.append((-gain, i, j))
        scored.sort()
        out += [("cx", i, j) for _, i, j in scored[:CASE_B_LIMIT]]

        if not case_a and self.allow_swaps:
            hosts = set(pos)
            swaps = []
            for a, b in sorted(g.edges):
                if a not in hosts and b not in hosts:
                    continue
                l2 = _swap_tuple(node.l2p, a, b)
                pos2 = self.pos(l2)
                sets2 = _column_sets(rows, node.active, pos2)
                if any(min_pair_dist(g, sets2[k]) < min_pair_dist(g, sets[k]) for k in sets):
                    swaps.append(("swap", a, b))
            if not swaps and not out:
                swaps = [("swap", a, b) for a, b in sorted(g.edges) if a in hosts or b in hosts]
            out += swaps
        if not out:
            out = [("cx", i, j) for i, j in adj]
        return out

    def finish(self, rows, l2p):
        """Route the Gaussian-elimination CNOTs; returns (gates, l2p, cost)."""
        out = tuple(r >> self.P for r in rows)
        gates = []
        for i, j in _ge_moves(out):
            gs, l2p = route_cnot(self.g, l2p, self.lines[i], self.lines[j])
            gates += gs
        gates += self.final_x(l2p)
        return gates, l2p, gate_cost(gates)[1]

    def final_x(self, l2p):
        return [x(l2p[self.lines[p]]) for p in range(self.n) if self.block.affine[p]]


def hw_synthesize_block(block: PhaseBlock, g: CouplingGraph, l2p: tuple,
                        cfg: EngineConfig = EngineConfig(), bound: int | None = None,
                        allow_swaps: bool = True, search_finish: bool = False) -> HwResult | None:
    """Best-first synthesis of one unmerged block under connectivity ``g``.

    ``l2p`` maps every logical qubit to a physical one.  With ``search_finish``
    the output part is also solved by search over adjacent CNOTs (no routing),
    which is how templates are produced.
    """
    t0 = time.monotonic()
    prob = _HwProblem(block, g, allow_swaps, search_finish)
    stats = BlockStats()
    rows, live, gates, _ = prob.settle(prob.base.rows0, prob.base.phase_mask, l2p)
    h1v, h2v = prob.heuristics(rows, live, l2p)
    root = HwSearchNode(rows, live, live, tuple(l2p), 0, h1v, h2v, 0, None, gates)
    best = None
    best_cost = bound

    def goal(node):
        nonlocal best, best_cost
        if search_finish:
            if tuple(r >> prob.P for r in node.rows) != prob.unit:
                return False
            fin, l2, cost = prob.final_x(node.l2p), node.l2p, 0
        else:
            fin, l2, cost = prob.finish(node.rows, node.l2p)
        stats.solutions += 1
        total = node.g + cost
        if best_cost is None or total < best_cost:
            best = (node.path_gates() + fin, l2, total)
            best_cost = total
            stats.best_at = stats.expanded
        return True

    if live == 0 and goal(root):
        stats.wall_time = time.monotonic() - t0
        return None if best is None else HwResult(best[0], best[1], best[2], stats)

    heap = [(root.priority(), root)]
    seen = {(rows, live, live, root.l2p): 0}
    deadline = t0 + cfg.per_block_timeout
    cap = cfg.queue_capacity
    batch = max(1, cap // 10)
    seq = 0

    while heap and stats.solutions < cfg.solution_count:
        _, node = heapq.heappop(heap)
        if best_cost is not None and node.g + 1 >= best_cost:
            continue
        if seen.get((node.rows, node.live, node.active, node.l2p), -1) < node.g:
            continue
        stats.expanded += 1
        if stats.expanded % 64 == 0 and time.monotonic() > deadline:
            stats.timed_out = True
            break
        pos = prob.pos(node.l2p)
        for mv in prob.moves(node):
            l2p2 = node.l2p
            rows = list(node.rows)
            increased = 0
            if mv[0] == "cx":
                _, i, j = mv
                increased = rows[j] & ~rows[i] & node.live
                rows[i] ^= rows[j]
                step = (cx(pos[i], pos[j]),)
                cost = 1
            else:
                _, a, b = mv
                l2p2 = _swap_tuple(node.l2p, a, b)
                step = (swap(a, b),)
                cost = 3
            rows, live, rz_gates, completed = prob.settle(rows, node.live, l2p2)
            gcost = node.g + cost
            if best_cost is not None and gcost >= best_cost:
                continue
            active = node.active & ~increased & live
            if completed or not active:
                active = live
            child_gates = step + rz_gates
            if live == 0 and not search_finish:
                child = HwSearchNode(rows, live, active, l2p2, gcost, Fraction(0), 0, 0, node, child_gates)
                goal(child)
                if stats.solutions >= cfg.solution_count:
                    break
                continue
            key = (rows, live, active, l2p2)
            if seen.get(key, 1 << 30) <= gcost:
                continue
            seen[key] = gcost
            h1v, h2v = prob.heuristics(rows, live, l2p2)
            seq += 1
            child = HwSearchNode(rows, live, active, l2p2, gcost, h1v, h2v, seq, node, child_gates)
            if live == 0 and goal(child):
                continue
            heapq.heappush(heap, (child.priority(), child))
        if len(heap) > cap:
            drop = max(batch, len(heap) - cap)
            heap = heapq.nsmallest(len(heap) - drop, heap)
            heapq.heapify(heap)
            stats.dropped += drop

    stats.wall_time = time.monotonic() - t0
    if best is None:
        return None
    return HwResult(best[0], best[1], best[2], stats)


# -- whole circuits -------------------------------------------------------------


@dataclass
class HwReport:
    circuit: Circuit
    initial: list[int]
    final: list[int]
    block_stats: list[BlockStats]

    @property
    def weighted_cnots(self) -> int:
        return gate_cost(self.circuit.gates)[1]

    @property
    def timed_out(self) -> bool:
        return any(s.timed_out for s in self.block_stats)


def _hw_pass(c: Circuit, g: CouplingGraph, l2p: tuple, cfg: EngineConfig):
    part = partition_levels(c)
    out: list[Gate] = []
    stats = []
    for gates, layer in zip(part.blocks, part.layers):
        blk = build_block(gates)
        replay, l2_replay = route_gates(g, blk.leading + rotation_merged(blk), l2p)
        rcost = gate_cost(replay)
        res = hw_synthesize_block(blk, g, l2p, cfg, bound=rcost[1] + 1)
        if res is not None and (gate_cost(res.gates) <= rcost):
            body, l2p = blk_leading(blk, l2p) + res.gates, res.l2p
            res.stats.fallback = False
            stats.append(res.stats)
        else:
            body, l2p = replay, l2_replay
            st = res.stats if res is not None else BlockStats()
            st.fallback = True
            stats.append(st)
        out += body
        tail, l2p = route_gates(g, blk.trailing + layer, l2p)
        out += tail
    return out, l2p, stats


def blk_leading(blk: PhaseBlock, l2p) -> list[Gate]:
    return [gt.on(*(l2p[q] for q in gt.qubits)) for gt in blk.leading]


def hw_optimize(c: Circuit, g: CouplingGraph, cfg: EngineConfig = EngineConfig(), rounds: int = 3) -> HwReport:
    """Hardware-aware optimization with forward/backward initial-mapping refinement.

    Runs ``rounds`` forward passes.  Between them, a pass over the inverse
    circuit starting from the last final mapping proposes the next initial
    mapping.  The forward result with the fewest weighted CNOTs wins.
    """
    if c.qubit_count > g.n:
        raise TooManyQubits(f"{c.qubit_count} logical qubits on a {g.n}-qubit device")
    c = merge_rotations(c, "last")
    init = tuple(range(g.n))
    inverse = c.inverse()
    best = None
    for r in range(rounds):
        gates, final, stats = _hw_pass(c, g, init, cfg)
        cand = HwReport(Circuit(g.n, gates, c.name), list(init), list(final), stats)
        key = (cand.weighted_cnots, len(cand.circuit.gates))
        log.info("mapping round %d: weighted cx=%d", r, cand.weighted_cnots)
        if best is None or key < best[0]:
            best = (key, cand)
        if r == rounds - 1 or g.is_complete:
            break
        _, back_final, _ = _hw_pass(inverse, g, final, cfg)
        if tuple(back_final) == tuple(init):
            break
        init = tuple(back_final)
    return best[1]


def connectivity_audit(c: Circuit, g: CouplingGraph) -> bool:
    """Every two-qubit gate acts on adjacent physical qubits."""
    return all(g.adjacent(*gt.qubits) for gt in c.gates if len(gt.qubits) == 2)


def linear_template(block: PhaseBlock, line: list[int], cfg: EngineConfig | None = None) -> list[Gate]:
    """Synthesize ``block`` using only CNOTs between neighbours along ``line``.

    ``line`` lists the block's logical qubits in path order.  No SWAPs are used,
    and the output map is solved by search rather than routed elimination.
    """
    if sorted(line) != block.lines:
        raise ValueError("line must list exactly the block's qubits")
    cfg = cfg or EngineConfig(per_block_timeout=600)
    n = max(line) + 1
    g = CouplingGraph(n, [(line[k], line[k + 1]) for k in range(len(line) - 1)] + _idle_edges(n, line))
    res = hw_synthesize_block(block, g, tuple(range(n)), cfg, allow_swaps=False, search_finish=True)
    if res is None:
        raise TimeoutError("no template found within the budget")
    return res.gates


def _idle_edges(n, line):
    # qubits outside the path hang off its end so the graph stays connected
    extra = [q for q in range(n) if q not in line]
    chain = [line[-1]] + extra
    return [(chain[k], chain[k + 1]) for k in range(len(chain) - 1)]
