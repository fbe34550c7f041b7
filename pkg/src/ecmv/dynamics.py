"""Exact light-cone time evolution and transport observables.

A packet started inside ``[a, b]`` is supported in ``[a - 2t, b + 2t]``
after ``t`` steps, so evolving on a slab that contains the whole light cone
is exact: no truncation error enters any dynamical quantity here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Iterator, Sequence

import numpy as np

from .core import ECMVOperator, VerblunskySequence, WavePacket, build_ecmv

DEFAULT_MAX_SITES = 10_000_000


class MemoryBudgetError(RuntimeError):
    """The light-cone window would exceed the configured site cap."""


# --------------------------------------------------------------------------- #
#                           growth functions                                  #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class GrowthFunction:
    """Increasing unbounded ``f`` entering the almost-ballistic criterion.

    kind ``log``: ``ln(param + t)``; kind ``power``: ``t**param``;
    kind ``table``: linear interpolation through ``table`` = ((t, f), ...),
    strictly increasing, undefined outside the tabulated range.
    """

    kind: str = "log"
    param: float = 10.0
    table: tuple[tuple[float, float], ...] = ()

    def __post_init__(self):
        if self.kind == "log":
            if self.param < 1.0:
                raise ValueError("log growth needs param >= 1 so that f > 0 for t >= 0")
        elif self.kind == "power":
            if self.param <= 0.0:
                raise ValueError("power growth needs a positive exponent")
        elif self.kind == "table":
            ts = [p[0] for p in self.table]
            fs = [p[1] for p in self.table]
            if len(ts) < 2 or any(np.diff(ts) <= 0) or any(np.diff(fs) <= 0) or min(fs) <= 0:
                raise ValueError("tabulated growth must be positive and strictly increasing")
        else:
            raise ValueError(f"unknown growth kind {self.kind!r}")

    def __call__(self, t: float) -> float:
        if self.kind == "log":
            return math.log(self.param + t)
        if self.kind == "power":
            return float(t) ** self.param
        ts, fs = zip(*self.table)
        if not ts[0] <= t <= ts[-1]:
            raise ValueError(f"t = {t} outside tabulated growth range [{ts[0]}, {ts[-1]}]")
        return float(np.interp(t, ts, fs))

    def describe(self) -> dict:
        out = {"kind": self.kind, "param": self.param}
        if self.kind == "table":
            out["table"] = [list(p) for p in self.table]
        return out

    @classmethod
    def from_description(cls, d: dict) -> "GrowthFunction":
        table = tuple(tuple(map(float, p)) for p in d.get("table", ()))
        return cls(d["kind"], float(d.get("param", 0.0)), table)


def criterion_cutoff(T: int, f: GrowthFunction) -> float:
    """T / f(T)^{1/5}, used as a real threshold (no rounding)."""
    return T / f(T) ** 0.2


def criterion_rhs(T: int, f: GrowthFunction) -> float:
    """1 / f(T)^{2/5}."""
    return f(T) ** -0.4


# --------------------------------------------------------------------------- #
#                        lattice projections                                  #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SiteProjection:
    """Orthogonal projection onto span{delta_n : lo <= n <= hi} (bounds may be infinite)."""

    lo: float = -math.inf
    hi: float = math.inf

    @classmethod
    def ball(cls, radius: float) -> "SiteProjection":
        """Sites with |n| < radius."""
        m = math.ceil(radius) - 1
        if m < 0:
            return cls.empty()
        return cls(-m, m)

    @classmethod
    def empty(cls) -> "SiteProjection":
        return cls(1, 0)

    def mask(self, sites: np.ndarray) -> np.ndarray:
        return (sites >= self.lo) & (sites <= self.hi)

    def __call__(self, psi: WavePacket) -> WavePacket:
        return WavePacket(psi.offset, np.where(self.mask(psi.sites), psi.amplitudes, 0))

    def mass(self, psi: WavePacket) -> float:
        w = np.abs(psi.amplitudes) ** 2
        return float(w[self.mask(psi.sites)].sum())


# --------------------------------------------------------------------------- #
#                             observables                                     #
# --------------------------------------------------------------------------- #


def second_moment(psi: WavePacket) -> float:
    """||X psi||^2 = sum n^2 |psi(n)|^2."""
    n = psi.sites.astype(np.float64)
    return float(np.dot(n * n, np.abs(psi.amplitudes) ** 2))


def tail_mass(psi: WavePacket, cutoff: float) -> float:
    """sum_{|n| >= cutoff} |psi(n)|^2."""
    if cutoff < 0:
        raise ValueError("cutoff must be nonnegative")
    n = np.abs(psi.sites)
    w = np.abs(psi.amplitudes) ** 2
    return float(w[n >= cutoff].sum())


# --------------------------------------------------------------------------- #
#                              evolution                                      #
# --------------------------------------------------------------------------- #


def light_cone_operator(coeffs: VerblunskySequence, lo: int, hi: int, steps: int,
                        max_sites: int = DEFAULT_MAX_SITES) -> ECMVOperator:
    """Slab operator holding every packet reachable from [lo, hi] in ``steps`` steps."""
    needed = 4 * steps + (hi - lo + 1)
    if needed > max_sites:
        raise MemoryBudgetError(f"light cone needs {needed} sites, cap is {max_sites}")
    pad = 2 * steps + 4
    return build_ecmv(coeffs, (lo - pad, hi + pad))


def trajectory(op: ECMVOperator, psi0: WavePacket, steps: int,
               direction: str = "forward") -> Iterator[WavePacket]:
    """Yield psi0, E psi0, ..., E^steps psi0 (or powers of E^{-1})."""
    psi = psi0
    yield psi
    for _ in range(steps):
        psi = op.apply(psi, direction)
        yield psi


@dataclass
class TransportSeries:
    """Second moment ``||X psi(t)||^2`` and ``ratio = m2 / t^2`` on recorded times.

    ``ratio`` is NaN at t = 0.  ``tail_mass`` is filled when a cutoff was
    configured.  ``norm_drift`` is max_t | ||psi(t)|| - ||psi(0)|| |.
    """

    times: np.ndarray
    second_moment: np.ndarray
    ballistic_ratio: np.ndarray
    tail_mass: np.ndarray | None = None
    norm_drift: float = 0.0
    states: list[WavePacket] | None = field(default=None, repr=False)


def evolve(coeffs: VerblunskySequence, psi0: WavePacket, tmax: int, *,
           stride: int = 1, cutoff: float | Callable[[int], float] | None = None,
           keep_states: bool = False, max_sites: int = DEFAULT_MAX_SITES,
           op: ECMVOperator | None = None) -> TransportSeries:
    """Evolve ``psi0`` for ``tmax`` steps, recording observables every ``stride`` steps."""
    if tmax < 1:
        raise ValueError("tmax must be >= 1")
    if stride < 1:
        raise ValueError("stride must be >= 1")
    if op is None:
        op = light_cone_operator(coeffs, psi0.lo, psi0.hi, tmax, max_sites)
    n0 = psi0.norm()
    times, m2, tails, states = [], [], [], []
    drift = 0.0
    for t, psi in enumerate(trajectory(op, psi0, tmax)):
        drift = max(drift, abs(psi.norm() - n0))
        if t % stride and t != tmax:
            continue
        times.append(t)
        m2.append(second_moment(psi))
        if cutoff is not None:
            c = cutoff(t) if callable(cutoff) else cutoff
            tails.append(tail_mass(psi, c))
        if keep_states:
            states.append(psi)
    times = np.asarray(times)
    m2 = np.asarray(m2)
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(times > 0, m2 / np.maximum(times, 1) ** 2, np.nan)
    return TransportSeries(times, m2, ratio,
                           np.asarray(tails) if cutoff is not None else None,
                           drift, states if keep_states else None)


# --------------------------------------------------------------------------- #
#                           momentum operator                                 #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class MomentumOperator:
    """P = X E - E X; matrix elements (n - m) E_{nm}, bandwidth two."""

    parent: ECMVOperator

    def apply(self, psi: WavePacket) -> WavePacket:
        # P commutes with translating X, so centre it on the packet
        c = (psi.lo + psi.hi) // 2
        e_psi = self.parent.apply(psi)
        e_x_psi = self.parent.apply(psi.position(c))
        return e_psi.position(c) - e_x_psi

    def heisenberg(self, psi: WavePacket, s: int) -> WavePacket:
        """P(s) psi = E^{-s} P E^{s} psi."""
        for _ in range(s):
            psi = self.parent.apply(psi)
        psi = self.apply(psi)
        for _ in range(s):
            psi = self.parent.apply(psi, "inverse")
        return psi

    def dense(self) -> np.ndarray:
        e = self.parent.dense()
        x = self.parent.position_diag()
        return (x[:, None] - x[None, :]) * e


def momentum_apply(P: MomentumOperator, psi: WavePacket) -> WavePacket:
    return P.apply(psi)


def heisenberg_telescope_check(coeffs: VerblunskySequence, psi0: WavePacket, t: int,
                               max_sites: int = DEFAULT_MAX_SITES) -> float:
    """|| (E^{-t} X E^{t} - X - E^{-1} sum_{s<t} P(s)) psi0 ||.

    The sum is accumulated Horner-style, ``acc <- E^{-1}(P E^s psi0 + acc)``
    for s = t-1, ..., 0, which needs t forward and t inverse applications.
    """
    if t < 0:
        raise ValueError("t must be nonnegative")
    if t == 0:
        return 0.0
    op = light_cone_operator(coeffs, psi0.lo, psi0.hi, 2 * t + 2, max_sites)
    P = MomentumOperator(op)
    forward = list(trajectory(op, psi0, t))
    p_terms = [P.apply(forward[s]) for s in range(t)]
    lhs = forward[t].position()
    for _ in range(t):
        lhs = op.apply(lhs, "inverse")
    lhs = lhs - psi0.position()
    acc = WavePacket(0, np.zeros(1))
    for s in range(t - 1, -1, -1):
        acc = op.apply(p_terms[s] + acc, "inverse")
    return (lhs - acc).norm()


# --------------------------------------------------------------------------- #
#                      almost-ballistic criterion                             #
# --------------------------------------------------------------------------- #


def tail_average(coeffs: VerblunskySequence, T: int, cutoff: float,
                 psi0: WavePacket | None = None, max_sites: int = DEFAULT_MAX_SITES) -> float:
    """(1/T) sum_{t=T}^{2T-1} tail_mass(E^t psi0, cutoff), psi0 = delta_0 by default."""
    if T < 1:
        raise ValueError("T must be >= 1")
    psi0 = WavePacket.delta(0) if psi0 is None else psi0
    op = light_cone_operator(coeffs, psi0.lo, psi0.hi, 2 * T - 1, max_sites)
    total = 0.0
    for t, psi in enumerate(trajectory(op, psi0, 2 * T - 1)):
        if t >= T:
            total += tail_mass(psi, cutoff)
    return total / T


def criterion_lhs(coeffs: VerblunskySequence, T: int, f: GrowthFunction,
                  max_sites: int = DEFAULT_MAX_SITES) -> float:
    """Time-averaged mass of E^t delta_0 beyond T / f(T)^{1/5}, t in [T, 2T)."""
    return tail_average(coeffs, T, criterion_cutoff(T, f), max_sites=max_sites)


def time_avg_corr(coeffs: VerblunskySequence, proj: SiteProjection, x: WavePacket,
                  y: WavePacket, T: int, max_sites: int = DEFAULT_MAX_SITES) -> complex:
    """(1/T) sum_{t=T}^{2T-1} <P E^t x, P E^t y>."""
    if T < 1:
        raise ValueError("T must be >= 1")
    lo, hi = min(x.lo, y.lo), max(x.hi, y.hi)
    op = light_cone_operator(coeffs, lo, hi, 2 * T - 1, max_sites)
    total = 0j
    for t, (xt, yt) in enumerate(zip(trajectory(op, x, 2 * T - 1), trajectory(op, y, 2 * T - 1))):
        if t >= T:
            total += proj(xt).inner(proj(yt))
    return total / T


def projected_mass_average(coeffs: VerblunskySequence, proj: SiteProjection, psi: WavePacket,
                           T: int, max_sites: int = DEFAULT_MAX_SITES) -> float:
    """(1/T) sum_{t=T}^{2T-1} ||P E^t psi||^2, i.e. time_avg_corr(psi, psi) without the copy."""
    op = light_cone_operator(coeffs, psi.lo, psi.hi, 2 * T - 1, max_sites)
    total = 0.0
    for t, pt in enumerate(trajectory(op, psi, 2 * T - 1)):
        if t >= T:
            total += proj.mass(pt)
    return total / T


def transport_rows(series: TransportSeries) -> Sequence[tuple]:
    tails = series.tail_mass if series.tail_mass is not None else [math.nan] * len(series.times)
    return list(zip(series.times.tolist(), series.second_moment.tolist(),
                    series.ballistic_ratio.tolist(), list(tails)))
