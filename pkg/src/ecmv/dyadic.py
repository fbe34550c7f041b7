"""Exact dyadic rationals p / 2**e.

Frequencies produced by the quasiballistic constructor are sums of powers
of two with factorial exponents, so the denominators get large very
quickly.  Python integers carry the arithmetic; ``fractions.Fraction`` is
used for mixed comparisons.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from functools import total_ordering
from numbers import Rational


@total_ordering
@dataclass(frozen=True, init=False)
class DyadicRational:
    """The number ``numerator / 2**exponent`` in lowest terms.

    ``numerator`` is odd unless the value is zero, in which case the
    exponent is 0.
    """

    numerator: int
    exponent: int

    def __init__(self, numerator: int, exponent: int = 0):
        if exponent < 0:
            raise ValueError("exponent must be nonnegative")
        p, e = int(numerator), int(exponent)
        if p == 0:
            e = 0
        else:
            # strip common factors of two
            tz = (p & -p).bit_length() - 1
            shift = min(tz, e)
            p >>= shift
            e -= shift
        object.__setattr__(self, "numerator", p)
        object.__setattr__(self, "exponent", e)

    @classmethod
    def power_of_two(cls, k: int) -> "DyadicRational":
        """2**k for any integer k."""
        if k >= 0:
            return cls(1 << k, 0)
        return cls(1, -k)

    @classmethod
    def from_fraction(cls, x: Fraction | int) -> "DyadicRational":
        x = Fraction(x)
        d = x.denominator
        if d & (d - 1):
            raise ValueError(f"{x} is not dyadic")
        return cls(x.numerator, d.bit_length() - 1)

    @property
    def denominator(self) -> int:
        return 1 << self.exponent

    def to_fraction(self) -> Fraction:
        return Fraction(self.numerator, self.denominator)

    def __float__(self) -> float:
        return float(self.to_fraction())

    def _coerce(self, other) -> "DyadicRational":
        if isinstance(other, DyadicRational):
            return other
        if isinstance(other, (int, Rational)):
            return DyadicRational.from_fraction(Fraction(other))
        return NotImplemented

    def __add__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        e = max(self.exponent, other.exponent)
        p = (self.numerator << (e - self.exponent)) + (other.numerator << (e - other.exponent))
        return DyadicRational(p, e)

    __radd__ = __add__

    def __neg__(self):
        return DyadicRational(-self.numerator, self.exponent)

    def __sub__(self, other):
        other = self._coerce(other)
        if other is NotImplemented:
            return NotImplemented
        return self + (-other)

    def __rsub__(self, other):
        return (-self) + other

    def __abs__(self):
        return DyadicRational(abs(self.numerator), self.exponent)

    def __eq__(self, other):
        if isinstance(other, DyadicRational):
            return self.numerator == other.numerator and self.exponent == other.exponent
        if isinstance(other, (int, Rational)):
            return self.to_fraction() == other
        if isinstance(other, float):
            return self.to_fraction() == Fraction(other)
        return NotImplemented

    def __lt__(self, other):
        if isinstance(other, DyadicRational):
            other = other.to_fraction()
        elif isinstance(other, float):
            other = Fraction(other)
        elif not isinstance(other, (int, Rational)):
            return NotImplemented
        return self.to_fraction() < other

    def __hash__(self):
        return hash(self.to_fraction())

    def __repr__(self):
        return f"DyadicRational({self.numerator}, {self.exponent})"

    def __str__(self):
        if self.exponent == 0:
            return str(self.numerator)
        return f"{self.numerator}/2^{self.exponent}"

    def to_json(self) -> dict:
        return {"p": self.numerator, "e": self.exponent}

    @classmethod
    def from_json(cls, obj: dict) -> "DyadicRational":
        return cls(int(obj["p"]), int(obj["e"]))
