from __future__ import annotations

from fractions import Fraction

import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecmv.dyadic import DyadicRational

dyadics = st.builds(DyadicRational, st.integers(-10**30, 10**30), st.integers(0, 200))


def test_lowest_terms():
    d = DyadicRational(12, 4)
    assert (d.numerator, d.exponent) == (3, 2)
    assert DyadicRational(0, 9) == DyadicRational(0)
    assert DyadicRational(0, 9).exponent == 0


def test_power_of_two_and_str():
    assert DyadicRational.power_of_two(-720).to_fraction() == Fraction(1, 2**720)
    assert DyadicRational.power_of_two(3) == 8
    assert str(DyadicRational(3, 2)) == "3/2^2"


def test_json_round_trip():
    d = DyadicRational(5, 121)
    assert DyadicRational.from_json(d.to_json()) == d
    assert d.to_json() == {"p": 5, "e": 121}


def test_from_fraction_rejects_non_dyadic():
    with pytest.raises(ValueError):
        DyadicRational.from_fraction(Fraction(1, 3))
    with pytest.raises(ValueError):
        DyadicRational(1, -1)


@given(dyadics, dyadics)
def test_arithmetic_matches_fractions(a, b):
    assert (a + b).to_fraction() == a.to_fraction() + b.to_fraction()
    assert (a - b).to_fraction() == a.to_fraction() - b.to_fraction()
    assert (a < b) == (a.to_fraction() < b.to_fraction())
    assert (a == b) == (a.to_fraction() == b.to_fraction())
    assert hash(a + b) == hash((a + b).to_fraction())


@given(st.lists(st.integers(1, 8), min_size=1, max_size=6, unique=True))
def test_factorial_increments_sum_exactly(ks):
    import math
    total = DyadicRational(0)
    for k in sorted(ks):
        total = total + DyadicRational.power_of_two(-math.factorial(k))
    expected = sum(Fraction(1, 2 ** math.factorial(k)) for k in ks)
    assert total.to_fraction() == expected
    assert total.denominator == 2 ** math.factorial(max(ks))
