from __future__ import annotations

from fractions import Fraction

import numpy as np
import pytest

from ecmv.core import WavePacket, centered_window, truncate
from ecmv.floquet import BandInterval, band_arc
from ecmv.models import (
    UAMOParams,
    free_coeffs,
    random_coeffs,
    uamo_coeffs,
    unimodular_coeffs,
)
from ecmv.spectral import (
    InsufficientTailError,
    arc_projection,
    autocorrelation,
    cross_correlation,
    decay_fit,
    density_sup,
    diagonalize,
    eigen_momentum_residual,
    estimate_triple_norm,
    spectral_fourier_bound_check,
    stabilized_density_sup,
)


def _check_eigensystem(op, es):
    e = op.dense()
    assert np.abs(e @ es.vectors - es.vectors * es.eigenvalues).max() < 1e-8
    assert np.abs(np.abs(es.eigenvalues) - 1).max() < 1e-8
    assert np.abs(es.vectors.conj().T @ es.vectors - np.eye(es.size)).max() < 1e-8


def test_free_four_site_truncation():
    op = truncate(free_coeffs(), centered_window(4))
    es = diagonalize(op)
    assert es.size == 4
    _check_eigensystem(op, es)


def test_decoupled_blocks_read_off_diagonal():
    op = truncate(unimodular_coeffs(np.exp(0.3j)), centered_window(6))
    es = diagonalize(op)
    assert np.allclose(np.sort_complex(es.eigenvalues), np.sort_complex(np.diag(op.dense())))


def test_completeness_on_uamo():
    op = truncate(uamo_coeffs(UAMOParams(0.4, 0.95, Fraction(13, 32), 0.1)), centered_window(500))
    es = diagonalize(op)
    _check_eigensystem(op, es)
    d0 = WavePacket.delta(0).on_window(*op.window)
    assert np.sum(np.abs(es.coefficients(d0)) ** 2) == pytest.approx(1.0, abs=1e-8)


def test_arc_projection_algebra(rng):
    op = truncate(random_coeffs(1), centered_window(80))
    es = diagonalize(op)
    v = rng.normal(size=80) + 1j * rng.normal(size=80)
    assert np.sum(np.abs(es.coefficients(v)) ** 2) == pytest.approx(np.vdot(v, v).real, rel=1e-10)
    arc = BandInterval(0.5, 2.0)
    pv = arc_projection(es, arc, v)
    assert np.abs(arc_projection(es, arc, pv) - pv).max() < 1e-10
    e = op.dense()
    assert np.abs(e @ pv - arc_projection(es, arc, e @ v)).max() < 1e-8
    w = rng.normal(size=80) + 0j
    assert np.vdot(w, pv) == pytest.approx(np.vdot(arc_projection(es, arc, w), v), abs=1e-10)
    rest = v - pv
    assert np.linalg.norm(v) ** 2 == pytest.approx(np.linalg.norm(pv) ** 2 + np.linalg.norm(rest) ** 2,
                                                   abs=1e-10)
    assert np.allclose(arc_projection(es, BandInterval.full_circle(), v), v, atol=1e-12)
    assert np.all(arc_projection(es, BandInterval.empty(), v) == 0)
    packet = arc_projection(es, arc, WavePacket.delta(0))
    assert isinstance(packet, WavePacket)


def test_eigen_momentum_identity_random_and_degenerate():
    for op in (truncate(random_coeffs(9), centered_window(60)),
               truncate(unimodular_coeffs(), centered_window(20))):
        assert eigen_momentum_residual(op, diagonalize(op)) < 1e-8


def test_autocorrelation_basic_cases():
    free = autocorrelation(free_coeffs(), WavePacket.delta(0), 20)
    assert free[0] == 1.0
    assert np.all(np.abs(np.delete(free.values, 20)) == 0)
    frozen = autocorrelation(unimodular_coeffs(1j), WavePacket.delta(0), 20)
    assert np.allclose(np.abs(frozen.values), 1.0)
    psi = WavePacket.from_sites([0, 1, 2], [0.6, 0.0, 0.8j])
    ac = autocorrelation(random_coeffs(4), psi, 15)
    assert ac[0] == pytest.approx(1.0)
    cc = cross_correlation(random_coeffs(4), psi, psi, 15)
    assert np.allclose(cc.values, ac.values, atol=1e-13)
    assert np.allclose(ac.values[::-1], np.conj(ac.values))


def test_fejer_density_cases():
    lebesgue = density_sup(autocorrelation(free_coeffs(), WavePacket.delta(0), 64), 64)
    assert np.allclose(lebesgue.values, 1.0)
    assert lebesgue.sup_estimate == pytest.approx(1.0)
    ac = autocorrelation(unimodular_coeffs(1j), WavePacket.delta(0), 128)
    for K in (16, 32, 64):
        d = density_sup(ac, K)
        assert d.sup_estimate == pytest.approx(K, rel=1e-3)
        assert d.values.mean() == pytest.approx(1.0, abs=1e-6)
    est = stabilized_density_sup(ac, 16)
    assert est.atom and est.triple_norm == np.inf
    with pytest.raises(ValueError):
        density_sup(ac, 500)


def test_band_projected_density_stabilizes():
    p = UAMOParams(0.9, 0.3, Fraction(1, 4), 0.1)
    c = uamo_coeffs(p)
    op = truncate(c, centered_window(228))
    psi = arc_projection(diagonalize(op), band_arc(c, 0.1), WavePacket.delta(0))
    est = estimate_triple_norm(c, psi)
    assert est.stable and not est.atom
    assert abs(est.sups[-1] / est.sups[-2] - 1) <= 0.1
    lhs, bound = spectral_fourier_bound_check(c, WavePacket.delta(5), psi, 512)
    assert 0 < lhs <= bound


def test_fourier_bound_trivial_cases():
    assert spectral_fourier_bound_check(free_coeffs(), WavePacket(0, np.zeros(1)),
                                        WavePacket.delta(0), 10) == (0.0, 0.0)
    lhs, bound = spectral_fourier_bound_check(free_coeffs(), WavePacket.delta(0),
                                              WavePacket.delta(0), 50)
    assert lhs == pytest.approx(1.0) and lhs <= bound * (1 + 1e-9)


def test_decay_fit_cases():
    n = np.arange(-100, 100)
    v = np.exp(-0.5 * np.abs(n))
    fit = decay_fit(v / np.linalg.norm(v), n)
    assert fit.center == 0
    assert fit.rate == pytest.approx(0.5, abs=0.01) and fit.r_squared > 0.99
    with pytest.raises(InsufficientTailError):
        decay_fit(np.eye(1, 200, 50).ravel())
    wave = np.exp(0.7j * np.arange(200)) / np.sqrt(200)
    flat = decay_fit(wave)
    assert abs(flat.rate) < 1e-6 and flat.r_squared < 0.1
