"""Equivalence oracles: canonical phase-polynomial forms and dense unitaries.

This module deliberately does not reuse the optimizer's simulator so that it
can serve as an independent check.
"""

from __future__ import annotations

import cmath
import math
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .angles import Angle
from .qasm import Circuit, Gate

MAX_DENSE_QUBITS = 10


class NonPhasePolyGate(ValueError):
    pass


class TooLarge(ValueError):
    def __init__(self, n: int):
        super().__init__(f"{n} qubits exceeds the dense limit of {MAX_DENSE_QUBITS}")
        self.n = n


@dataclass(frozen=True)
class CanonicalForm:
    """Sum-over-paths data of a {cx, rz, x, swap} circuit.

    ``terms`` is a sorted tuple of ``(parity, angle)`` where parity is a tuple of
    input indices and angle is normalized to [0, 2*pi).  ``output_map[q]`` is the
    parity held by qubit ``q`` at the end, ``affine[q]`` its constant bit.
    """

    terms: tuple
    output_map: tuple
    affine: tuple
    global_phase: Angle

    def equivalent(self, other: CanonicalForm) -> bool:
        """Equal up to global phase."""
        return (self.output_map, self.affine) == (other.output_map, other.affine) and _terms_equal(
            self.terms, other.terms
        )


def _terms_equal(a, b, tol=1e-9) -> bool:
    if len(a) != len(b):
        return False
    for (pa, aa), (pb, ab) in zip(a, b):
        if pa != pb or not aa.close_to(ab, tol):
            return False
    return True


def _accumulate(terms: dict, parity: frozenset, angle: Angle) -> None:
    terms[parity] = terms.get(parity, Angle.zero()) + angle


def _finish_terms(terms: dict) -> tuple:
    keep = [(tuple(sorted(p)), a) for p, a in terms.items() if p and not a.is_zero(1e-12)]
    return tuple(sorted(keep, key=lambda t: t[0]))


def canonical_form(c: Circuit) -> CanonicalForm:
    """Forward-simulate ``c`` with parities as frozensets of input indices."""
    n = c.qubit_count
    wire = [frozenset([q]) for q in range(n)]
    aff = [0] * n
    terms: dict = {}
    gphase = Angle.zero()
    for g in c.gates:
        if g.name == "cx":
            a, b = g.qubits
            wire[b] = wire[b] ^ wire[a]
            aff[b] ^= aff[a]
        elif g.name == "x":
            aff[g.qubits[0]] ^= 1
        elif g.name == "swap":
            a, b = g.qubits
            wire[a], wire[b] = wire[b], wire[a]
            aff[a], aff[b] = aff[b], aff[a]
        elif g.name == "rz":
            q = g.qubits[0]
            if aff[q]:
                gphase = gphase + g.angle
                _accumulate(terms, wire[q], -g.angle)
            else:
                _accumulate(terms, wire[q], g.angle)
        else:
            raise NonPhasePolyGate(g.name)
    return CanonicalForm(
        _finish_terms(terms),
        tuple(tuple(sorted(w)) for w in wire),
        tuple(aff),
        gphase,
    )


def ssa_form(gates: list[Gate]) -> tuple:
    """Canonical data of a gate list whose non-phase gates start fresh variables.

    Variables are named ``(qubit, version)``; version ``v`` of ``q`` is the value
    right after the ``v``-th non-phase gate on ``q``.  Returns a tuple of
    (terms, pre-barrier values, barrier gates, final values), comparable with
    :func:`ssa_equivalent`.
    """
    version: dict[int, int] = {}
    wire: dict[int, frozenset] = {}
    aff: dict[int, int] = {}
    terms: dict = {}
    before: dict = {}
    barrier: dict = {}

    def touch(q):
        if q not in wire:
            version[q] = 0
            wire[q] = frozenset([(q, 0)])
            aff[q] = 0

    for g in gates:
        for q in g.qubits:
            touch(q)
        if g.name == "cx":
            a, b = g.qubits
            wire[b] = wire[b] ^ wire[a]
            aff[b] ^= aff[a]
        elif g.name == "x":
            aff[g.qubits[0]] ^= 1
        elif g.name == "swap":
            a, b = g.qubits
            wire[a], wire[b] = wire[b], wire[a]
            aff[a], aff[b] = aff[b], aff[a]
        elif g.name == "rz":
            q = g.qubits[0]
            _accumulate(terms, wire[q], -g.angle if aff[q] else g.angle)
        else:
            q = g.qubits[0]
            key = (q, version[q])
            before[key] = (tuple(sorted(wire[q])), aff[q])
            barrier[key] = g
            version[q] += 1
            wire[q] = frozenset([(q, version[q])])
            aff[q] = 0
    final = {q: (tuple(sorted(wire[q])), aff[q]) for q in wire if wire[q] != frozenset([(q, version[q])]) or aff[q]}
    return _finish_terms(terms), before, barrier, final


def ssa_equivalent(a: list[Gate], b: list[Gate]) -> bool:
    ta, ba, ga, fa = ssa_form(a)
    tb, bb, gb, fb = ssa_form(b)
    return ba == bb and ga == gb and fa == fb and _terms_equal(ta, tb)


# -- dense simulation -----------------------------------------------------------

_H = np.array([[1, 1], [1, -1]], dtype=complex) / math.sqrt(2)
_X = np.array([[0, 1], [1, 0]], dtype=complex)


def _phase(angle: Angle) -> complex:
    if angle.is_exact:
        p = angle.pi_mult
        # exact values on the eighth roots of unity
        table = {
            Fraction(0): 1,
            Fraction(1, 2): 1j,
            Fraction(1): -1,
            Fraction(3, 2): -1j,
        }
        if p in table:
            return complex(table[p])
        if p.denominator == 4:
            s = math.sqrt(0.5)
            return complex(s * round(math.cos(math.pi * p) / s), s * round(math.sin(math.pi * p) / s))
    return cmath.exp(1j * angle.to_float())


_ONE_QUBIT = {"h": _H, "x": _X}


def unitary(c: Circuit) -> np.ndarray:
    """Dense unitary of ``c``; qubit ``q`` is bit ``q`` of the basis index."""
    n = c.qubit_count
    if n > MAX_DENSE_QUBITS:
        raise TooLarge(n)
    dim = 1 << n
    # state[..., col]: axis k of the first n axes is qubit n-1-k
    u = np.eye(dim, dtype=complex).reshape((2,) * n + (dim,))

    def ax(q):
        return n - 1 - q

    for g in c.gates:
        if g.name == "rz":
            # phase-gate convention: diag(1, e^{i theta}); global phase ignored
            idx = [slice(None)] * (n + 1)
            idx[ax(g.qubits[0])] = 1
            u[tuple(idx)] *= _phase(g.angle)
        elif g.name == "cx":
            a, t = g.qubits
            idx = [slice(None)] * (n + 1)
            idx[ax(a)] = 1
            sub = u[tuple(idx)]
            ta = ax(t) - (1 if ax(t) > ax(a) else 0)
            u[tuple(idx)] = np.flip(sub, axis=ta)
        elif g.name == "swap":
            a, b = g.qubits
            u = np.swapaxes(u, ax(a), ax(b)).copy()
        elif g.name in _ONE_QUBIT:
            m = _ONE_QUBIT[g.name]
            u = np.moveaxis(np.tensordot(m, u, axes=([1], [ax(g.qubits[0])])), 0, ax(g.qubits[0]))
        else:
            raise ValueError(f"no matrix for gate '{g.name}'")
    return u.reshape(dim, dim)


def permutation_matrix(perm: list[int]) -> np.ndarray:
    """Matrix moving the value of qubit ``i`` onto qubit ``perm[i]``."""
    n = len(perm)
    dim = 1 << n
    p = np.zeros((dim, dim))
    for idx in range(dim):
        out = 0
        for i in range(n):
            if idx >> i & 1:
                out |= 1 << perm[i]
        p[out, idx] = 1
    return p


def unitary_equal(a: Circuit, b: Circuit, perm: list[int] | None = None, tol: float = 1e-9,
                  initial_perm: list[int] | None = None) -> bool:
    """True iff U_a equals P(perm) U_b P(initial_perm)^T up to a global phase.

    ``b`` may act on more qubits than ``a``; ``a`` is padded with idle qubits.
    """
    n = max(a.qubit_count, b.qubit_count)
    if n > MAX_DENSE_QUBITS:
        raise TooLarge(n)
    ua = unitary(Circuit(n, a.gates))
    ub = unitary(Circuit(n, b.gates))
    if initial_perm is not None:
        ub = ub @ permutation_matrix(_pad(initial_perm, n))
    if perm is not None:
        ub = permutation_matrix(_pad(perm, n)).T @ ub
    k = np.unravel_index(np.argmax(np.abs(ub)), ub.shape)
    if abs(ub[k]) < 1e-12:
        return False
    phase = ua[k] / ub[k]
    if abs(abs(phase) - 1) > 1e-6:
        return False
    return float(np.max(np.abs(ua - phase * ub))) < tol


def _pad(perm, n):
    perm = list(perm)
    used = set(perm)
    rest = [q for q in range(n) if q not in used]
    return perm + rest[: n - len(perm)]
