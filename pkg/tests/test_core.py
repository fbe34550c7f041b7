from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ecmv.core import (
    CoefficientDomainError,
    VerblunskySequence,
    WavePacket,
    WindowOverflowError,
    build_ecmv,
    centered_window,
    load_coefficients_csv,
    tabulated_sequence,
    theta_block,
    truncate,
)
from ecmv.models import constant_coeffs, free_coeffs, random_coeffs, unimodular_coeffs


def test_theta_block_is_unitary():
    a = 0.3 - 0.4j
    b = theta_block(a)
    assert np.allclose(b @ b.conj().T, np.eye(2), atol=1e-15)
    assert b[0, 0] == np.conj(a) and b[1, 1] == -a


def test_free_walk_moves_by_two():
    op = build_ecmv(free_coeffs(), (-10, 11))
    left = op.apply(WavePacket.delta(0))
    right = op.apply(WavePacket.delta(1))
    assert left.support() == (-2, -2)
    assert right.support() == (3, 3)
    assert abs(left.amplitude(-2)) == 1.0


def test_dense_matches_l_times_m():
    op = truncate(random_coeffs(4), centered_window(32), np.exp(0.7j))
    assert np.abs(op.dense() - op.dense_L() @ op.dense_M()).max() < 1e-14


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.floats(0.0, 0.99), st.floats(0.0, 2 * np.pi))
def test_truncation_is_unitary(seed, radius, phase):
    op = truncate(random_coeffs(seed, radius), centered_window(40), np.exp(1j * phase))
    e = op.dense()
    assert np.abs(e.conj().T @ e - np.eye(op.size)).max() < 1e-12


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 10**6), st.integers(-20, 20))
def test_inverse_undoes_forward(seed, site):
    op = build_ecmv(random_coeffs(seed), (-40, 41))
    psi = WavePacket.delta(site)
    back = op.apply(op.apply(psi), "inverse")
    assert (back - psi).norm() < 1e-14


def test_window_overflow_detected():
    op = build_ecmv(free_coeffs(), (-4, 5))
    with pytest.raises(WindowOverflowError):
        op.apply(WavePacket.delta(4))


def test_truncation_rejects_bad_input():
    with pytest.raises(ValueError):
        truncate(free_coeffs(), (-3, 4))
    with pytest.raises(ValueError):
        truncate(free_coeffs(), (-4, 3), eta=0.5)
    with pytest.raises(ValueError):
        centered_window(7)


def test_centered_window_contains_origin():
    lo, hi = centered_window(500)
    assert (lo, hi - lo + 1) == (-250, 500)
    assert lo % 2 == 0 and hi % 2 == 1


def test_coefficient_domain():
    with pytest.raises(CoefficientDomainError):
        VerblunskySequence(lambda n: np.full(n.shape, 1.0 + 0j)).values(0, 3)
    with pytest.raises(ValueError):
        constant_coeffs(1.0)
    assert np.all(np.abs(unimodular_coeffs().values(0, 5)) == 1)


def test_declared_period_is_checked():
    with pytest.raises(ValueError):
        VerblunskySequence(lambda n: 0.1 * (n % 3).astype(complex), "bad", period=2)


def test_unimodular_model_is_diagonal():
    op = build_ecmv(unimodular_coeffs(1j), (-6, 7))
    e = op.dense()
    assert np.abs(e - np.diag(np.diag(e))).max() == 0


def test_tabulated_sequences(tmp_path):
    seq = tabulated_sequence({0: 0.1, 1: 0.2j}, period=2)
    assert seq(5) == 0.2j and seq(-2) == 0.1
    bare = tabulated_sequence({0: 0.1})
    with pytest.raises(KeyError):
        bare(3)
    path = tmp_path / "coeffs.csv"
    path.write_text("# test\nn,re,im\n0,0.1,0\n1,0,0.2\n")
    loaded = load_coefficients_csv(path, period=2)
    assert np.allclose(loaded.values(0, 3), [0.1, 0.2j, 0.1, 0.2j])


def test_wavepacket_algebra():
    a = WavePacket.from_sites([0, 3], [1.0, 2.0j])
    b = WavePacket.delta(3)
    assert a.inner(b) == pytest.approx(-2.0j)
    assert b.inner(a) == pytest.approx(2.0j)
    assert (a - b * 2j).support() == (0, 0)
    assert a.position(1.0).amplitude(3) == pytest.approx(4.0j)
    with pytest.raises(WindowOverflowError):
        a.on_window(1, 5)
