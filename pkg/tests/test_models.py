from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from ecmv.dyadic import DyadicRational
from ecmv.models import (
    PerturbationParams,
    UAMOParams,
    perturb,
    random_coeffs,
    reference_family,
    uamo_coeffs,
    uamo_period,
    uamo_sampling,
    uamo_variation,
)


def test_uamo_formula():
    p = UAMOParams(0.6, 0.9, Fraction(1, 4), 0.0)
    c = uamo_coeffs(p)
    # alpha_1 = 0.9 sin(pi/2), alpha_2 = sqrt(1 - 0.36)
    assert c(1) == pytest.approx(0.9)
    assert c(2) == pytest.approx(0.8)
    for n in range(-5, 6):
        assert c(2 * n - 1) == pytest.approx(0.9 * math.sin(2 * math.pi * (n / 4)), abs=1e-15)


def test_rational_frequency_is_exactly_periodic():
    p = UAMOParams(0.4, 0.95, Fraction(13, 32), 0.37)
    c = uamo_coeffs(p)
    assert c.period == 64
    far = 10**15
    assert np.array_equal(c.values(1, 64), c.values(far * 64 + 1, far * 64 + 64))
    assert uamo_period(DyadicRational(3, 5)) == 64
    assert uamo_period(0.3) is None


def test_huge_denominators_use_exact_reduction():
    phi = DyadicRational(2**199 + 1, 200)
    c = uamo_coeffs(UAMOParams(0.3, 0.9, phi, 0.0))
    n = 10**6 + 3
    expected = 0.9 * math.sin(2 * math.pi * float(Fraction(n * (2**199 + 1) % 2**200, 2**200)))
    assert c(2 * n - 1) == pytest.approx(expected, rel=1e-12)


def test_perturbation_changes_only_two_sites():
    base = uamo_coeffs(UAMOParams(0.3, 0.9, Fraction(1, 4), 0.1))
    pert = perturb(base, PerturbationParams(0.5j, -0.25))
    a, b = base.values(-10, 10), pert.values(-10, 10)
    diff = np.flatnonzero(a != b) - 10
    assert set(diff) == {0, 1}
    assert pert(0) == 0.5j and pert(1) == -0.25
    assert pert.period is None
    assert uamo_variation(UAMOParams(0.3, 0.9)).period == 2


def test_parameter_validation():
    with pytest.raises(ValueError):
        UAMOParams(1.2, 0.5)
    with pytest.raises(ValueError):
        PerturbationParams(1.0, 0)
    assert UAMOParams(0.3, 0.9).supercritical
    assert not UAMOParams(0.9, 0.3).supercritical


def test_sampling_function_reproduces_coefficients():
    p = UAMOParams(0.3, 0.9, Fraction(3, 8), 0.2)
    c = uamo_coeffs(p)
    for n in range(-4, 5):
        assert c(2 * n - 1) == pytest.approx(uamo_sampling(p, p.theta + n * float(p.phi), 0))
        assert c(2 * n) == pytest.approx(uamo_sampling(p, 0.0, 1))


def test_random_coefficients_are_reproducible_by_window():
    c = random_coeffs(5, radius=0.7)
    whole = c.values(-3000, 3000)
    part = random_coeffs(5, radius=0.7).values(1000, 1010)
    assert np.array_equal(whole[4000:4011], part)
    assert np.abs(whole).max() <= 0.7
    assert not np.array_equal(whole, random_coeffs(6, radius=0.7).values(-3000, 3000))


def test_reference_family_dispatch():
    assert np.all(reference_family("free").values(0, 3) == 0)
    assert np.all(reference_family("constant", alpha=0.2j).values(0, 3) == 0.2j)
    with pytest.raises(ValueError):
        reference_family("bogus")
