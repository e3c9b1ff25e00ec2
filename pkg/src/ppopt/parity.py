"""The joint parity matrix: phase columns and output columns over GF(2).

Rows are qubits (block variables); each row is an int bitset over columns.
Phase column ``k`` is bit ``k``; output column ``j`` is bit ``P + j`` where ``P``
is the number of phase columns.

Convention: a circuit CNOT with control ``i`` and target ``j`` updates the
matrix as ``row_i ^= row_j``.  The matrix records parities in terms of the
current wire values, which transform contravariantly to the wires themselves.
A phase column with a single 1 in row ``k`` is realized by an Rz on qubit ``k``.
The output part is done when it is the identity.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from functools import lru_cache

from .angles import Angle


class SameQubit(ValueError):
    pass


class NotCompletable(ValueError):
    pass


class SingularMatrix(ValueError):
    pass


def popcount(v: int) -> int:
    return v.bit_count()


def bits(v: int):
    """Yield the indices of the set bits of ``v`` in increasing order."""
    while v:
        low = v & -v
        yield low.bit_length() - 1
        v ^= low


def single_bits(rows, mask: int) -> int:
    """Columns (within ``mask``) that have exactly one 1 across ``rows``."""
    seen = multi = 0
    for r in rows:
        r &= mask
        multi |= seen & r
        seen |= r
    return seen & ~multi


@dataclass(frozen=True)
class JointParityMatrix:
    """Snapshot of the synthesis state.

    Attributes:
        rows: One bitset per row.  Removed phase columns are cleared.
        angles: Angle of each phase column, by original column index.
        live: Bitmask of phase columns still awaiting an Rz.
    """

    rows: tuple[int, ...]
    angles: tuple[Angle, ...]
    live: int

    @classmethod
    def from_columns(cls, n: int, phase: list[tuple[int, Angle]], outputs: list[int]):
        """Build from phase parities and output parities given as row bitsets.

        ``outputs[j]`` is the parity (over rows) that row ``j`` must end up
        holding; it becomes output column ``j``.
        """
        P = len(phase)
        rows = [0] * n
        for k, (par, _) in enumerate(phase):
            for r in bits(par):
                rows[r] |= 1 << k
        for j, par in enumerate(outputs):
            for r in bits(par):
                rows[r] |= 1 << (P + j)
        return cls(tuple(rows), tuple(a for _, a in phase), (1 << P) - 1)

    @property
    def n(self) -> int:
        return len(self.rows)

    @property
    def phase_count(self) -> int:
        return len(self.angles)

    @property
    def phase_mask(self) -> int:
        return (1 << self.phase_count) - 1

    def output_rows(self) -> tuple[int, ...]:
        P = self.phase_count
        return tuple(r >> P for r in self.rows)

    def column(self, k: int) -> list[int]:
        return [(r >> k) & 1 for r in self.rows]

    def dump(self) -> str:
        """Rows of 0/1 with ``|`` between the live phase part and the output part."""
        P = self.phase_count
        live = list(bits(self.live))
        lines = []
        for r in self.rows:
            left = "".join(str((r >> k) & 1) for k in live)
            right = "".join(str((r >> (P + j)) & 1) for j in range(self.n))
            lines.append(f"{left}|{right}")
        return "\n".join(lines)


def apply_cnot(m: JointParityMatrix, control: int, target: int) -> JointParityMatrix:
    """CNOT(control, target): ``row_control ^= row_target``."""
    if control == target:
        raise SameQubit(f"control and target are both {control}")
    rows = list(m.rows)
    rows[control] ^= rows[target]
    return replace(m, rows=tuple(rows))


def completable_columns(m: JointParityMatrix, row_mask: int | None = None) -> list[tuple[int, int]]:
    """Live phase columns of weight 1 paired with the row holding the 1.

    With ``row_mask`` only columns whose single 1 lies in a masked row count.
    """
    single = single_bits(m.rows, m.live)
    out = []
    for k in bits(single):
        r = next(i for i, row in enumerate(m.rows) if row >> k & 1)
        if row_mask is None or row_mask >> r & 1:
            out.append((k, r))
    return out


def remove_column(m: JointParityMatrix, k: int) -> JointParityMatrix:
    if not (m.live >> k & 1) or sum((r >> k) & 1 for r in m.rows) != 1:
        raise NotCompletable(f"column {k} is not a live weight-1 column")
    clear = ~(1 << k)
    return replace(m, rows=tuple(r & clear for r in m.rows), live=m.live & clear)


def h1(m: JointParityMatrix) -> int:
    """Number of 1s in the live phase part."""
    return sum(popcount(r & m.live) for r in m.rows)


def h2(m: JointParityMatrix) -> int:
    """CNOT count of :func:`gaussian_finish` on the output part."""
    return ge_cost(m.output_rows())


# -- Gaussian elimination -----------------------------------------------------


def gaussian_finish_rows(rows: tuple[int, ...], allowed: int | None = None) -> list[tuple[int, int]]:
    """Reduce a square GF(2) matrix to the identity with row additions.

    Row ``i`` is a bitset over columns; a move ``(i, j)`` means ``row_i ^= row_j``
    (a CNOT with control ``i`` and target ``j``).  Column ``c`` is pivoted on
    row ``c``.  At each step the pivot needing the fewest CNOTs is processed
    next; ties go to the smallest resulting total weight, then the lowest index.  ``allowed``
    restricts the processed columns/rows to a subset; the rest must already be
    trivial.

    Raises:
        SingularMatrix: if some column has no usable pivot.
    """
    return list(_ge_moves(tuple(rows), allowed))


@lru_cache(maxsize=200_000)
def _ge_moves(rows: tuple[int, ...], allowed: int | None) -> tuple[tuple[int, int], ...]:
    rows = list(rows)
    n = len(rows)
    todo = list(range(n)) if allowed is None else list(bits(allowed))
    moves: list[tuple[int, int]] = []
    rng = range(n)

    while todo:
        best = None
        for c in todo:
            bit = 1 << c
            holders = [r for r in rng if r != c and rows[r] & bit]
            if rows[c] & bit:
                fixers = [None]
            else:
                fixers = [r for r in holders if r in todo]
            for f in fixers:
                cost = len(holders) + (f is not None)
                if best is not None and cost > best[0][0]:
                    continue
                piv = rows[c] if f is None else rows[c] ^ rows[f]
                delta = piv.bit_count() - rows[c].bit_count()
                for r in holders:
                    delta += (rows[r] ^ piv).bit_count() - rows[r].bit_count()
                key = (cost, delta, c)
                if best is None or key < best[0]:
                    best = (key, c, f, holders)
        if best is None:
            raise SingularMatrix("no pivot available")
        _, c, f, holders = best
        if f is not None:
            rows[c] ^= rows[f]
            moves.append((c, f))
        for r in holders:
            rows[r] ^= rows[c]
            moves.append((r, c))
        todo.remove(c)
    if any(rows[i] != 1 << i for i in range(n)):
        raise SingularMatrix("elimination did not reach the identity")
    return tuple(moves)


@lru_cache(maxsize=200_000)
def ge_cost(rows: tuple[int, ...]) -> int:
    return len(_ge_moves(rows, None))


def gaussian_finish(m: JointParityMatrix) -> list[tuple[int, int]]:
    """CNOTs (control, target) that turn the output part into the identity.

    Precondition: no live phase columns.
    """
    if m.live:
        raise ValueError("phase columns remain")
    return gaussian_finish_rows(m.output_rows())


def gf2_solve(vectors: list[int], target: int) -> list[int] | None:
    """Indices S with XOR of ``vectors[s]`` over S equal to ``target``, or None."""
    basis: list[tuple[int, int, int]] = []  # (pivot bit, vector, combination mask)
    for i, v in enumerate(vectors):
        combo = 1 << i
        for piv, bv, bc in basis:
            if v >> piv & 1:
                v ^= bv
                combo ^= bc
        if v:
            basis.append((v.bit_length() - 1, v, combo))
    combo = 0
    for piv, bv, bc in basis:
        if target >> piv & 1:
            target ^= bv
            combo ^= bc
    if target:
        return None
    return list(bits(combo))


def is_invertible(rows) -> bool:
    return gf2_rank(rows) == len(rows)


def gf2_rank(rows) -> int:
    basis = []
    for v in rows:
        for b in basis:
            v = min(v, v ^ b)
        if v:
            basis.append(v)
    return len(basis)
