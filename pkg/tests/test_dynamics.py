from __future__ import annotations

import math
from fractions import Fraction

import numpy as np
import pytest

from ecmv.core import WavePacket, build_ecmv, centered_window, truncate
from ecmv.dynamics import (
    GrowthFunction,
    MemoryBudgetError,
    MomentumOperator,
    SiteProjection,
    criterion_cutoff,
    criterion_lhs,
    criterion_rhs,
    evolve,
    heisenberg_telescope_check,
    light_cone_operator,
    projected_mass_average,
    tail_mass,
    time_avg_corr,
    transport_rows,
)
from ecmv.models import UAMOParams, free_coeffs, random_coeffs, uamo_coeffs, unimodular_coeffs


def test_free_second_moment_and_ratio():
    s = evolve(free_coeffs(), WavePacket.delta(0), 50, stride=10)
    assert s.times.tolist() == [0, 10, 20, 30, 40, 50]
    assert np.allclose(s.second_moment, 4 * s.times ** 2)
    assert math.isnan(s.ballistic_ratio[0])
    assert np.allclose(s.ballistic_ratio[1:], 4.0)
    assert s.norm_drift < 1e-14


def test_frozen_dynamics():
    s = evolve(unimodular_coeffs(), WavePacket.delta(0), 20)
    assert np.all(s.second_moment == 0)


def test_memory_budget():
    with pytest.raises(MemoryBudgetError):
        evolve(free_coeffs(), WavePacket.delta(0), 100, max_sites=50)


def test_momentum_norm_bound():
    for seed in range(5):
        op = truncate(random_coeffs(seed, 0.95), centered_window(60))
        assert np.linalg.norm(MomentumOperator(op).dense(), 2) <= 2.0 + 1e-12


def test_momentum_apply_is_translation_invariant():
    op = build_ecmv(random_coeffs(3), (-30, 31))
    P = MomentumOperator(op)
    psi = WavePacket.from_sites([-3, 4, 5], [1, 0.5j, -0.2])
    x = op.position_diag()
    dense = x[:, None] * op.dense() - op.dense() * x[None, :]
    v = psi.on_window(op.lo, op.hi)
    assert np.abs(P.apply(psi).on_window(op.lo, op.hi) - dense @ v).max() < 1e-13


def test_telescope_small_cases():
    c = uamo_coeffs(UAMOParams(0.4, 0.9, Fraction(3, 8), 0.1))
    for t in (0, 1, 2, 17):
        assert heisenberg_telescope_check(c, WavePacket.delta(0), t) < 1e-11


def test_growth_functions():
    f = GrowthFunction("log", 10.0)
    assert f(0) == pytest.approx(math.log(10))
    g = GrowthFunction("power", 2.0)
    assert g(3) == 9.0
    h = GrowthFunction("table", 0, ((0, 1), (10, 2)))
    assert h(5) == 1.5
    with pytest.raises(ValueError):
        h(11)
    with pytest.raises(ValueError):
        GrowthFunction("table", 0, ((0, 2), (1, 1)))
    assert GrowthFunction.from_description(h.describe()) == h
    assert criterion_cutoff(32, g) == pytest.approx(32 / 32 ** 0.4)
    assert criterion_rhs(32, g) == pytest.approx(32 ** -0.8)


def test_ball_projection():
    assert (SiteProjection.ball(2.5).lo, SiteProjection.ball(2.5).hi) == (-2, 2)
    assert (SiteProjection.ball(3).lo, SiteProjection.ball(3).hi) == (-2, 2)
    assert SiteProjection.ball(0).mass(WavePacket.delta(0)) == 0.0
    psi = WavePacket.from_sites([-3, 0, 3], [0.6, 0, 0.8])
    assert tail_mass(psi, 3) == pytest.approx(1.0)
    assert tail_mass(psi, 3.5) == 0.0


def test_free_criterion_lhs_is_one():
    # the free packet sits at -2t, beyond any cutoff below 2T
    assert criterion_lhs(free_coeffs(), 16, GrowthFunction()) == pytest.approx(1.0)


def test_time_averaged_correlations():
    c = random_coeffs(2)
    proj = SiteProjection(-3, 3)
    psi = WavePacket.from_sites([0, 1], [0.6, 0.8j])
    assert time_avg_corr(c, proj, psi, psi, 12).real == pytest.approx(
        projected_mass_average(c, proj, psi, 12))
    assert projected_mass_average(c, SiteProjection(), psi, 12) == pytest.approx(1.0)


def test_light_cone_operator_is_large_enough():
    op = light_cone_operator(free_coeffs(), -1, 1, 10)
    assert op.lo <= -1 - 2 * 10 - 2 and op.hi >= 1 + 2 * 10 + 2


def test_transport_rows():
    s = evolve(free_coeffs(), WavePacket.delta(0), 3, cutoff=1.0)
    rows = transport_rows(s)
    assert rows[2][:2] == (2, 16.0)
    assert rows[0][3] == 0.0 and rows[3][3] == 1.0
