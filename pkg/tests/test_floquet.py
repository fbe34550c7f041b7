from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from ecmv.floquet import (
    BandInterval,
    DegenerateRhoError,
    MissingPeriodError,
    RootCountMismatch,
    band_arc,
    band_interval,
    curve_velocity,
    discriminant,
    floquet_curves,
    monodromy,
    szego_matrix,
    szego_product,
)
from ecmv.models import UAMOParams, constant_coeffs, free_coeffs, random_coeffs, uamo_coeffs


def _oracle_discriminant(alphas, z):
    """Plain loop over explicit 2x2 Szegő matrices."""
    q = len(alphas) // 2
    m = np.eye(2, dtype=complex)
    for a in alphas:
        rho = math.sqrt(1 - abs(a) ** 2)
        m = np.array([[z, -np.conj(a)], [-a * z, 1]]) / rho @ m
    return z ** -q * np.trace(m)


def test_szego_matrix_entries():
    s = szego_matrix(0.6, 1j).entries
    assert np.allclose(s, np.array([[1j, -0.6], [-0.6j, 1]]) / 0.8)
    with pytest.raises(DegenerateRhoError):
        szego_matrix(1.0, 1.0)


def test_szego_product_order():
    c = uamo_coeffs(UAMOParams(0.3, 0.9, Fraction(1, 4), 0.2))
    z = np.exp(0.4j)
    prod = szego_product(c, (1, 3), z)
    manual = szego_matrix(c(3), z).entries @ szego_matrix(c(2), z).entries @ szego_matrix(c(1), z).entries
    assert np.allclose(prod, manual, atol=1e-14)


def test_free_discriminant_is_two_cos():
    th = np.linspace(0, 2 * np.pi, 17)
    d = discriminant(free_coeffs(), np.exp(1j * th))
    assert np.allclose(d, 2 * np.cos(th), atol=1e-14)


def test_discriminant_matches_oracle_and_is_real():
    c = uamo_coeffs(UAMOParams(0.5, 0.7, Fraction(3, 5), 0.31))
    alphas = c.values(1, c.period)
    for th in np.linspace(0, 2 * np.pi, 9):
        z = np.exp(1j * th)
        d = discriminant(c, z)
        assert d == pytest.approx(_oracle_discriminant(alphas, z), abs=1e-12)
        assert abs(d.imag) < 1e-12
    m = monodromy(c, np.exp(0.3j))
    assert abs(np.linalg.det(m.entries) - 1) < 1e-9


def test_discriminant_derivative_matches_finite_difference():
    c = constant_coeffs(0.3 + 0.2j)
    for th in (0.3, 1.1, 2.5):
        z = np.exp(1j * th)
        _, dd = discriminant(c, z, with_derivative=True)
        h = 1e-5
        fd = (discriminant(c, np.exp(1j * (th + h))) - discriminant(c, np.exp(1j * (th - h)))) / (2 * h)
        assert abs(dd * 1j * z - fd) < 1e-8


def test_missing_period():
    with pytest.raises(MissingPeriodError):
        discriminant(random_coeffs(0), 1.0)


def test_free_floquet_curves():
    ks = np.linspace(0, np.pi, 11)
    b1, b2 = floquet_curves(free_coeffs(), ks)
    assert np.allclose(np.exp(1j * b1.phase), np.exp(1j * ks), atol=1e-10)
    assert np.allclose(np.exp(1j * b2.phase), np.exp(-1j * ks), atol=1e-10)


def test_bands_are_continuous_and_consistent():
    c = uamo_coeffs(UAMOParams(0.3, 0.9, Fraction(1, 4), 0.1))
    ks = np.linspace(0, np.pi, 200)
    bands = floquet_curves(c, ks)
    assert len(bands) == 8
    for b in bands:
        assert b.residual().max() < 1e-8
        assert np.abs(np.diff(b.phase)).max() <= 0.1
    inner = (ks > 0.2) & (ks < np.pi - 0.2)
    v = curve_velocity(c, bands[0])
    fd = np.gradient(bands[0].z, ks)
    assert np.max(np.abs(v - fd)[inner] / np.abs(v[inner])) < 1e-2


def test_root_count_mismatch_with_coarse_scan():
    c = uamo_coeffs(UAMOParams(0.3, 0.9, Fraction(1, 8), 0.1))
    with pytest.raises(RootCountMismatch):
        floquet_curves(c, [1.0], scan_points=8)


def test_band_intervals():
    p = UAMOParams(0.3, 0.9, Fraction(1, 4))
    arcs, ell = band_interval(lambda th: uamo_coeffs(p.with_theta(th)), np.arange(8) / 8)
    assert ell > 0 and ell == min(a.length for a in arcs)
    arc = band_arc(free_coeffs())
    assert arc.length == pytest.approx(np.pi / 3, abs=1e-9)
    assert arc.contains(np.exp(1j * np.pi / 2))
    assert not arc.contains(np.exp(1j * 0.1))


def test_band_interval_contains_wraps():
    arc = BandInterval(6.0, 1.0)
    assert arc.contains(np.exp(0.5j)) and arc.contains(np.exp(6.1j))
    assert not arc.contains(np.exp(1.0j))
    assert BandInterval.full_circle().contains(np.exp(2j))
    assert not BandInterval.empty().contains(np.exp(2j))
