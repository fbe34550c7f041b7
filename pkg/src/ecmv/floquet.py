"""Szegő transfer matrices and Floquet theory for periodic coefficients.

For a 2q-periodic sequence the monodromy is

    T(z) = z^{-q} Sz(alpha_{2q}, z) ... Sz(alpha_1, z)

(highest index leftmost) and the discriminant is Delta(z) = tr T(z), real
on the unit circle.  The 2q Floquet curves solve Delta(z_j(k)) = 2 cos k;
they are labelled by sorting the roots of Delta at k = pi/2 by argument in
[0, 2 pi) and continued in k.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence

import numpy as np
from scipy.optimize import brentq

from .core import VerblunskySequence


class DegenerateRhoError(ValueError):
    """A Szegő matrix was requested for a unimodular coefficient."""


class MissingPeriodError(ValueError):
    """Floquet quantities need a periodic coefficient sequence."""


class RootCountMismatch(RuntimeError):
    """Fewer than 2q roots of the discriminant were found on the circle."""


class ContinuationJumpError(RuntimeError):
    """A Floquet curve could not be continued within the arc-step bound."""


# --------------------------------------------------------------------------- #
#                              Szegő matrices                                 #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class SzegoMatrix:
    entries: np.ndarray
    z: complex


def _rho_checked(alpha: np.ndarray) -> np.ndarray:
    a2 = np.abs(alpha) ** 2
    if np.any(a2 >= 1.0):
        raise DegenerateRhoError("Szegő matrix undefined for |alpha| = 1 (rho = 0)")
    return np.sqrt(1.0 - a2)


def _szego_stack(alpha: complex, z: np.ndarray):
    """Sz(alpha, z) and d/dz Sz(alpha, z) broadcast over ``z``; shape (..., 2, 2)."""
    rho = float(_rho_checked(np.asarray([alpha]))[0])
    z = np.asarray(z, dtype=np.complex128)
    m = np.empty(z.shape + (2, 2), dtype=np.complex128)
    m[..., 0, 0] = z
    m[..., 0, 1] = -np.conj(alpha)
    m[..., 1, 0] = -alpha * z
    m[..., 1, 1] = 1.0
    dm = np.zeros_like(m)
    dm[..., 0, 0] = 1.0
    dm[..., 1, 0] = -alpha
    return m / rho, dm / rho


def szego_matrix(alpha: complex, z: complex) -> SzegoMatrix:
    """(1/rho) [[z, -conj(alpha)], [-alpha z, 1]]."""
    m, _ = _szego_stack(complex(alpha), np.asarray(z))
    return SzegoMatrix(m, complex(z))


def _ordered_product(alphas: Sequence[complex], z, derivative: bool = False):
    """Sz(alphas[-1]) ... Sz(alphas[0]) and optionally its z-derivative."""
    z = np.asarray(z, dtype=np.complex128)
    prod = np.broadcast_to(np.eye(2, dtype=np.complex128), z.shape + (2, 2)).copy()
    dprod = np.zeros_like(prod)
    for a in alphas:
        m, dm = _szego_stack(complex(a), z)
        if derivative:
            dprod = dm @ prod + m @ dprod
        prod = m @ prod
    return (prod, dprod) if derivative else prod


def szego_product(coeffs: VerblunskySequence, index_range: tuple[int, int], z) -> np.ndarray:
    """Sz(alpha_n, z) Sz(alpha_{n-1}, z) ... Sz(alpha_m, z) for range (m, n)."""
    m, n = index_range
    if n < m:
        raise ValueError("empty index range")
    return _ordered_product(coeffs.values(m, n), z)


def _period_q(coeffs: VerblunskySequence) -> int:
    if coeffs.period is None:
        raise MissingPeriodError(f"{coeffs.description}: no period set")
    return coeffs.period // 2


@dataclass(frozen=True)
class Monodromy:
    entries: np.ndarray
    period: int
    z: complex


def monodromy(coeffs: VerblunskySequence, z: complex) -> Monodromy:
    """z^{-q} Sz_{[1, 2q]}(z)."""
    q = _period_q(coeffs)
    prod = _ordered_product(coeffs.values(1, 2 * q), z)
    return Monodromy(complex(z) ** (-q) * prod, 2 * q, complex(z))


def _discriminant_from_alphas(alphas: np.ndarray, z, derivative: bool):
    q = len(alphas) // 2
    z = np.asarray(z, dtype=np.complex128)
    prod, dprod = _ordered_product(alphas, z, derivative=True)
    tr = np.trace(prod, axis1=-2, axis2=-1)
    zq = z ** (-q)
    delta = zq * tr
    if not derivative:
        return delta, None
    dtr = np.trace(dprod, axis1=-2, axis2=-1)
    ddelta = zq * dtr - q * zq / z * tr
    return delta, ddelta


def discriminant(coeffs: VerblunskySequence, z, with_derivative: bool = False):
    """Delta(z) = tr T(z) and, optionally, Delta'(z) by the product rule."""
    q = _period_q(coeffs)
    alphas = coeffs.values(1, 2 * q)
    d, dd = _discriminant_from_alphas(alphas, z, with_derivative)
    if np.ndim(z) == 0:
        d = complex(d)
        dd = None if dd is None else complex(dd)
    return (d, dd) if with_derivative else d


# --------------------------------------------------------------------------- #
#                            Floquet curves                                   #
# --------------------------------------------------------------------------- #


class _CircleDiscriminant:
    """Delta(e^{i phi}) and dDelta/dphi as real functions of the argument."""

    def __init__(self, coeffs: VerblunskySequence):
        self.q = _period_q(coeffs)
        self.alphas = coeffs.values(1, 2 * self.q)

    def __call__(self, phi):
        z = np.exp(1j * np.asarray(phi, dtype=np.float64))
        d, dd = _discriminant_from_alphas(self.alphas, z, True)
        return d.real, (dd * 1j * z).real


@dataclass(frozen=True)
class FloquetBand:
    """Samples of z_j(k); ``phase`` is the continuous (unwrapped) argument."""

    band_index: int
    k: np.ndarray
    phase: np.ndarray
    delta: np.ndarray

    @property
    def z(self) -> np.ndarray:
        return np.exp(1j * self.phase)

    def residual(self) -> np.ndarray:
        return np.abs(self.delta - 2.0 * np.cos(self.k))


def _roots_at_half_pi(disc: _CircleDiscriminant, scan_points: int) -> np.ndarray:
    phi = 2.0 * np.pi * np.arange(scan_points + 1) / scan_points
    g, _ = disc(phi)
    roots = []
    for i in range(scan_points):
        a, b = g[i], g[i + 1]
        if a == 0.0:
            roots.append(phi[i])
        elif a * b < 0.0:
            roots.append(brentq(lambda x: disc(x)[0], phi[i], phi[i + 1], xtol=1e-14))
    return np.sort(np.mod(np.asarray(roots), 2.0 * np.pi))


def _newton_step(disc, phi0, target, max_iter=80, tol=1e-10):
    phi = phi0
    for _ in range(max_iter):
        d, dphi = disc(phi)
        g = float(d) - target
        if g == 0.0:
            return phi, True
        if dphi == 0.0:
            break
        step = g / float(dphi)
        phi -= step
        if abs(step) < 1e-15:
            break
    d, dphi = disc(phi)
    g = abs(float(d) - target)
    # large discriminants (thin bands) are judged by the implied argument error
    return phi, g <= tol or g <= 1e-13 * abs(float(dphi))


def _advance(disc, phi, k_from, k_to, max_arc_step, band):
    k = k_from
    h = k_to - k_from
    while k != k_to:
        remaining = k_to - k
        if abs(h) > abs(remaining):
            h = remaining
        _, dphi = disc(phi)
        slope = -2.0 * math.sin(k) / float(dphi) if dphi != 0.0 else 0.0
        k_new = k_to if h == remaining else k + h
        pred = phi + slope * h
        if abs(pred - phi) > max_arc_step:
            pred = phi + math.copysign(max_arc_step, pred - phi)
        new, ok = _newton_step(disc, pred, 2.0 * math.cos(k_new))
        if ok and abs(new - phi) <= max_arc_step:
            phi, k = new, k_new
            h *= 2.0
            continue
        h *= 0.5
        if abs(h) < 1e-13:
            raise ContinuationJumpError(
                f"band {band}: cannot continue past k = {k:.17g} within arc step {max_arc_step}"
            )
    return phi


def floquet_curves(coeffs: VerblunskySequence, k_grid: Iterable[float], *,
                   bands: Sequence[int] | None = None, scan_points: int = 4096,
                   max_arc_step: float = 0.1) -> list[FloquetBand]:
    """Continue the labelled roots of Delta from k = pi/2 across ``k_grid``.

    ``k = pi/2`` is added to the continuation grid if absent and reported
    only when requested.  Bands are 1-based labels.
    """
    disc = _CircleDiscriminant(coeffs)
    q = disc.q
    req = np.asarray(sorted(set(float(k) for k in k_grid)))
    if req.size == 0 or req[0] < 0.0 or req[-1] > math.pi:
        raise ValueError("k grid must be a nonempty subset of [0, pi]")
    roots = _roots_at_half_pi(disc, scan_points)
    if roots.size != 2 * q:
        raise RootCountMismatch(f"found {roots.size} roots of Delta on the circle, expected {2 * q}")
    labels = range(1, 2 * q + 1) if bands is None else bands
    half = math.pi / 2
    up = [k for k in req if k > half]
    down = [k for k in req[::-1] if k < half]
    phases = {}
    for j in labels:
        start = float(roots[j - 1])
        path = {half: start}
        for seq in (up, down):
            phi, k_prev = start, half
            for k in seq:
                phi = _advance(disc, phi, k_prev, k, max_arc_step, j)
                path[k] = phi
                k_prev = k
        phases[j] = path
    _check_nearest_continuation(phases, sorted(set(req) | {half}))
    out = []
    for j in labels:
        ph = np.asarray([phases[j][k] for k in req])
        d, _ = disc(ph)
        out.append(FloquetBand(j, req.copy(), ph, np.asarray(d)))
    return out


def _check_nearest_continuation(phases: dict, ks: list[float], tol: float = 1e-9) -> None:
    """Each new point must be (one of) the nearest to its own previous point."""
    if len(phases) < 2:
        return
    labels = list(phases)
    for a, b in zip(ks[:-1], ks[1:]):
        for step in ((a, b), (b, a)):
            prev = np.exp(1j * np.asarray([phases[j][step[0]] for j in labels]))
            new = np.exp(1j * np.asarray([phases[j][step[1]] for j in labels]))
            dist = np.abs(new[:, None] - prev[None, :])
            own = np.diag(dist)
            if np.any(own > dist.min(axis=1) + tol):
                bad = labels[int(np.argmax(own - dist.min(axis=1)))]
                raise ContinuationJumpError(f"band {bad} jumped between k = {a:.6g} and k = {b:.6g}")


def curve_velocity(coeffs: VerblunskySequence, band: FloquetBand) -> np.ndarray:
    """dz_j/dk = -2 sin k / Delta'(z_j(k)) along a computed band."""
    _, dd = discriminant(coeffs, band.z, with_derivative=True)
    return -2.0 * np.sin(band.k) / dd


# --------------------------------------------------------------------------- #
#                           band intervals                                    #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class BandInterval:
    """Counter-clockwise arc from ``arg_start`` of length ``length``."""

    arg_start: float
    length: float
    theta: float = math.nan

    def __post_init__(self):
        if self.length < 0:
            raise ValueError("arc length must be nonnegative")

    @property
    def arg_end(self) -> float:
        return self.arg_start + self.length

    @classmethod
    def full_circle(cls) -> "BandInterval":
        return cls(0.0, 2.0 * math.pi)

    @classmethod
    def empty(cls) -> "BandInterval":
        return cls(0.0, 0.0)

    def contains(self, z) -> np.ndarray:
        if self.length >= 2.0 * math.pi:
            return np.ones(np.shape(z), dtype=bool)
        rel = np.mod(np.angle(z) - self.arg_start, 2.0 * math.pi)
        return rel <= self.length

    def to_json(self) -> dict:
        return {"theta": self.theta, "argStart": self.arg_start, "argEnd": self.arg_end,
                "length": self.length}


def band_arc(coeffs: VerblunskySequence, theta: float = math.nan, band: int = 1,
             k_range: tuple[float, float] = (math.pi / 3, 2 * math.pi / 3), **kw) -> BandInterval:
    """Arc swept by ``z_band(k)`` for k in ``k_range``."""
    (curve,) = floquet_curves(coeffs, [k_range[0], math.pi / 2, k_range[1]], bands=[band], **kw)
    a, b = curve.phase[0], curve.phase[-1]
    start = min(a, b)
    return BandInterval(float(np.mod(start, 2 * math.pi)), float(abs(b - a)), theta)


def band_interval(family: Callable[[float], VerblunskySequence], theta_grid: Iterable[float],
                  **kw) -> tuple[list[BandInterval], float]:
    """I_theta for every theta on the grid and ell = min_theta |I_theta| (must be > 0)."""
    arcs = [band_arc(family(float(th)), float(th), **kw) for th in theta_grid]
    if not arcs:
        raise ValueError("empty theta grid")
    ell = min(a.length for a in arcs)
    if not ell > 0.0:
        raise RuntimeError(f"band interval degenerated: min length {ell}")
    return arcs, ell
