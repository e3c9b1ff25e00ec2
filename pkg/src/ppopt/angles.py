"""Rotation angles kept exact whenever they are rational multiples of pi."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

TWO_PI = 2 * math.pi
FLOAT_MERGE_TOL = 1e-12


@dataclass(frozen=True)
class Angle:
    """An angle in [0, 2*pi).

    Exactly one of ``pi_mult`` (angle = pi_mult * pi, 0 <= pi_mult < 2) and
    ``radians`` is set.  Exact angles add exactly; any float operand makes the
    result a float.
    """

    pi_mult: Fraction | None = None
    radians: float | None = None

    def __post_init__(self):
        if (self.pi_mult is None) == (self.radians is None):
            raise ValueError("exactly one of pi_mult / radians must be given")

    @classmethod
    def exact(cls, num: int | Fraction, den: int = 1) -> Angle:
        return cls(pi_mult=(Fraction(num) / den) % 2)

    @classmethod
    def from_float(cls, rad: float) -> Angle:
        return cls(radians=float(rad) % TWO_PI)

    @classmethod
    def zero(cls) -> Angle:
        return cls(pi_mult=Fraction(0))

    @property
    def is_exact(self) -> bool:
        return self.pi_mult is not None

    def to_float(self) -> float:
        if self.pi_mult is not None:
            return float(self.pi_mult) * math.pi
        return self.radians

    def is_zero(self, tol: float = FLOAT_MERGE_TOL) -> bool:
        if self.pi_mult is not None:
            return self.pi_mult == 0
        r = self.radians
        return min(r, TWO_PI - r) < tol

    def __add__(self, other: Angle) -> Angle:
        if self.pi_mult is not None and other.pi_mult is not None:
            return Angle(pi_mult=(self.pi_mult + other.pi_mult) % 2)
        return Angle.from_float(self.to_float() + other.to_float())

    def __neg__(self) -> Angle:
        if self.pi_mult is not None:
            return Angle(pi_mult=(-self.pi_mult) % 2)
        return Angle.from_float(-self.radians)

    def __sub__(self, other: Angle) -> Angle:
        return self + (-other)

    def close_to(self, other: Angle, tol: float = 1e-9) -> bool:
        if self.pi_mult is not None and other.pi_mult is not None:
            return self.pi_mult == other.pi_mult
        return (self - other).is_zero(tol)

    def to_qasm(self) -> str:
        if self.pi_mult is None:
            return repr(self.radians)
        num, den = self.pi_mult.numerator, self.pi_mult.denominator
        if num == 0:
            return "0"
        head = "pi" if num == 1 else f"{num}*pi"
        return head if den == 1 else f"{head}/{den}"

    def __str__(self) -> str:
        return self.to_qasm()

    def __repr__(self) -> str:
        return f"Angle({self.to_qasm()})"
