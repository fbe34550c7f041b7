"""Spectral tools on finite truncations and for whole-line spectral measures.

Diagonalization goes through a complex Schur decomposition: for a normal
matrix the triangular factor is diagonal and the Schur vectors are an
orthonormal eigenbasis, even inside (near-)degenerate clusters.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg
from scipy.stats import linregress

from .core import ECMVOperator, VerblunskySequence, WavePacket
from .dynamics import DEFAULT_MAX_SITES, MomentumOperator, light_cone_operator, trajectory
from .floquet import BandInterval


class DiagonalizationError(RuntimeError):
    def __init__(self, message: str, residual: float):
        super().__init__(f"{message} (residual {residual:.3e})")
        self.residual = residual


class InsufficientTailError(ValueError):
    """Too few usable tail points for an exponential decay fit."""


# --------------------------------------------------------------------------- #
#                            eigensystems                                     #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class EigenSystem:
    """Eigenpairs of a finite truncation; ``vectors[:, j]`` belongs to ``eigenvalues[j]``."""

    lo: int
    eigenvalues: np.ndarray
    vectors: np.ndarray

    @property
    def size(self) -> int:
        return self.eigenvalues.size

    @property
    def sites(self) -> np.ndarray:
        return self.lo + np.arange(self.size)

    def coefficients(self, v: np.ndarray) -> np.ndarray:
        """<phi_j, v> for all j."""
        return self.vectors.conj().T @ v

    def vector(self, j: int) -> WavePacket:
        return WavePacket(self.lo, self.vectors[:, j])


def _clusters(vals: np.ndarray, tol: float) -> list[np.ndarray]:
    """Groups of indices whose eigenvalues chain together within ``tol``."""
    order = np.argsort(np.angle(vals))
    groups, cur = [], [order[0]]
    for a, b in zip(order[:-1], order[1:]):
        if abs(vals[b] - vals[a]) <= tol:
            cur.append(b)
        else:
            groups.append(cur)
            cur = [b]
    if len(groups) and abs(vals[cur[-1]] - vals[groups[0][0]]) <= tol:
        groups[0] = cur + groups[0]
    else:
        groups.append(cur)
    return [np.asarray(g) for g in groups if len(g) > 1]


def diagonalize(op: ECMVOperator, tol: float = 1e-8, cluster_tol: float = 1e-10) -> EigenSystem:
    """Full unitary eigendecomposition of a finite truncation.

    Inside each cluster of eigenvalues closer than ``cluster_tol`` the basis
    is rotated to diagonalize the position operator, so translated copies of
    a localized state (periodic approximants) come out separated rather than
    as arbitrary superpositions.
    """
    if not op.finite:
        raise ValueError("diagonalize needs a finite truncation")
    e = op.dense()
    t, z = scipy.linalg.schur(e, output="complex")
    vals = np.diag(t).copy()
    off = float(np.linalg.norm(np.triu(t, 1)))
    if cluster_tol > 0.0:
        x = op.position_diag()
        for g in _clusters(vals, cluster_tol):
            zc = z[:, g]
            _, w = np.linalg.eigh(zc.conj().T @ (x[:, None] * zc))
            z[:, g] = zc @ w
    resid = float(np.linalg.norm(e @ z - z * vals[None, :], axis=0).max())
    if off > tol or resid > tol or np.abs(np.abs(vals) - 1.0).max() > tol:
        raise DiagonalizationError("eigendecomposition failed to converge", max(off, resid))
    return EigenSystem(op.lo, vals, z)


def _as_window_array(es: EigenSystem, v) -> np.ndarray:
    if isinstance(v, WavePacket):
        supp = v.support()
        if supp is not None and (supp[0] < es.lo or supp[1] > es.lo + es.size - 1):
            raise ValueError("vector not supported on the truncation window")
        return v.on_window(es.lo, es.lo + es.size - 1)
    return np.asarray(v, dtype=np.complex128)


def arc_projection(es: EigenSystem, arc: BandInterval, v):
    """sum over eigenvalues in ``arc`` of <phi_j, v> phi_j (same type as ``v``)."""
    arr = _as_window_array(es, v)
    sel = arc.contains(es.eigenvalues)
    vs = es.vectors[:, sel]
    out = vs @ (vs.conj().T @ arr)
    return WavePacket(es.lo, out) if isinstance(v, WavePacket) else out


def eigen_momentum_residual(op: ECMVOperator, es: EigenSystem) -> float:
    """max_ij |<phi_i, P phi_j> - (z_j - z_i) <phi_i, X phi_j>| on a truncation."""
    v = es.vectors
    p = v.conj().T @ MomentumOperator(op).dense() @ v
    x = v.conj().T @ (op.position_diag()[:, None] * v)
    z = es.eigenvalues
    return float(np.abs(p - (z[None, :] - z[:, None]) * x).max())


# --------------------------------------------------------------------------- #
#                   autocorrelation and density estimates                     #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class AutocorrelationSeries:
    """mu(t) = <phi, E^t psi> for t = -T..T (``phi = psi`` for the autocorrelation)."""

    tmax: int
    values: np.ndarray

    @property
    def times(self) -> np.ndarray:
        return np.arange(-self.tmax, self.tmax + 1)

    def __getitem__(self, t: int) -> complex:
        return complex(self.values[t + self.tmax])


def _correlations(coeffs, phi: WavePacket, psi: WavePacket, tmax: int, max_sites: int,
                  backward: bool) -> tuple[np.ndarray, np.ndarray]:
    lo, hi = min(phi.lo, psi.lo), max(phi.hi, psi.hi)
    op = light_cone_operator(coeffs, lo, hi, tmax, max_sites)
    fwd = np.array([phi.inner(p) for p in trajectory(op, psi, tmax)])
    if not backward:
        return fwd, None
    bwd = np.array([phi.inner(p) for p in trajectory(op, psi, tmax, "inverse")])
    return fwd, bwd


def autocorrelation(coeffs: VerblunskySequence, psi: WavePacket, tmax: int,
                    max_sites: int = DEFAULT_MAX_SITES) -> AutocorrelationSeries:
    """<psi, E^t psi> by whole-line evolution; negative times by Hermitian symmetry."""
    fwd, _ = _correlations(coeffs, psi, psi, tmax, max_sites, backward=False)
    fwd[0] = fwd[0].real
    vals = np.concatenate([np.conj(fwd[:0:-1]), fwd])
    return AutocorrelationSeries(tmax, vals)


def cross_correlation(coeffs: VerblunskySequence, phi: WavePacket, psi: WavePacket, tmax: int,
                      max_sites: int = DEFAULT_MAX_SITES) -> AutocorrelationSeries:
    """<phi, E^t psi> for |t| <= tmax, both time directions evolved."""
    fwd, bwd = _correlations(coeffs, phi, psi, tmax, max_sites, backward=True)
    return AutocorrelationSeries(tmax, np.concatenate([bwd[:0:-1], fwd]))


@dataclass(frozen=True)
class DensityEstimate:
    """Fejér-smoothed density on the grid theta_m = 2 pi m / len(values)."""

    order: int
    values: np.ndarray

    @property
    def thetas(self) -> np.ndarray:
        return 2.0 * np.pi * np.arange(self.values.size) / self.values.size

    @property
    def sup_estimate(self) -> float:
        return float(self.values.max())

    @property
    def triple_norm(self) -> float:
        return math.sqrt(max(self.sup_estimate, 0.0))


def density_sup(ac: AutocorrelationSeries, K: int, grid_size: int = 4096) -> DensityEstimate:
    """F_K(e^{i theta}) = sum_{|t|<K} (1 - |t|/K) mu(t) e^{-i t theta} on a uniform grid.

    With mu(t) = int z^t dmu, this is the Fejér mean of the measure, so it
    is nonnegative and averages to mu(0) over the circle.
    """
    if K < 1 or K > ac.tmax:
        raise ValueError(f"smoothing order must lie in [1, {ac.tmax}], got {K}")
    m = max(grid_size, 2 * K)
    t = np.arange(-K + 1, K)
    c = (1.0 - np.abs(t) / K) * ac.values[t + ac.tmax]
    arr = np.zeros(m, dtype=np.complex128)
    np.add.at(arr, t % m, c)
    vals = np.fft.fft(arr).real
    if vals.min() < -1e-6:
        warnings.warn(f"Fejér density negative ({vals.min():.3e}); autocorrelation inconsistent",
                      RuntimeWarning, stacklevel=2)
    return DensityEstimate(K, vals)


@dataclass(frozen=True)
class StabilizedDensity:
    """Fejér density sups at doubling orders ``orders``.

    ``stable`` means the last doubling moved the sup by at most the relative
    tolerance.  ``atom`` means the last doubling still grew it by the atom
    ratio or more: a point mass makes the Fejér peak grow linearly in K, so
    the norm is then reported as infinite.  An unresolved thin band looks
    the same at small K, which is why the order is raised adaptively first.
    """

    orders: tuple[int, ...]
    sups: tuple[float, ...]
    stable: bool
    atom: bool

    @property
    def order(self) -> int:
        return self.orders[-1]

    @property
    def ratio(self) -> float:
        a, b = self.sups[-2], self.sups[-1]
        return b / a if a > 0 else math.inf

    @property
    def sup_estimate(self) -> float:
        return math.inf if self.atom else max(self.sups)

    @property
    def triple_norm(self) -> float:
        return math.sqrt(max(self.sup_estimate, 0.0))


def stabilized_density_sup(ac: AutocorrelationSeries, K: int = 256, k_max: int | None = None,
                           grid_size: int = 4096, rel_tol: float = 0.1,
                           atom_ratio: float = 1.5) -> StabilizedDensity:
    """Double the smoothing order from K until two consecutive sups agree.

    Orders up to ``k_max`` (default: the largest the series supports) are tried.
    """
    k_max = ac.tmax if k_max is None else min(k_max, ac.tmax)
    if 2 * K > k_max:
        raise ValueError(f"series of length {ac.tmax} too short for orders {K} and {2 * K}")
    orders = [K]
    sups = [density_sup(ac, K, grid_size).sup_estimate]
    while True:
        k = 2 * orders[-1]
        orders.append(k)
        sups.append(density_sup(ac, k, grid_size).sup_estimate)
        a, b = sups[-2], sups[-1]
        ratio = b / a if a > 0 else (1.0 if b <= 0 else math.inf)
        stable = abs(ratio - 1.0) <= rel_tol
        if stable or 2 * k > k_max:
            return StabilizedDensity(tuple(orders), tuple(sups), stable,
                                     not stable and ratio >= atom_ratio)


def estimate_triple_norm(coeffs: VerblunskySequence, psi: WavePacket, K: int = 256,
                         k_max: int = 1024, max_sites: int = DEFAULT_MAX_SITES) -> StabilizedDensity:
    """Stabilized density sup of ``psi``, extending the autocorrelation only as needed."""
    tmax = 2 * K
    while True:
        ac = autocorrelation(coeffs, psi, tmax, max_sites)
        est = stabilized_density_sup(ac, K, grid_size=max(4096, 2 * tmax))
        if est.stable or tmax >= k_max:
            return est
        tmax *= 2


def spectral_fourier_bound_check(coeffs: VerblunskySequence, phi: WavePacket, psi: WavePacket,
                                 T: int, K: int = 256, k_max: int = 1024,
                                 max_sites: int = DEFAULT_MAX_SITES) -> tuple[float, float]:
    """(sum_{|t|<=T} |<phi, E^t psi>|^2, sup F_psi * ||phi||^2)."""
    nphi = phi.norm()
    if nphi == 0.0:
        return 0.0, 0.0
    cc = cross_correlation(coeffs, phi, psi, T, max_sites)
    lhs = float(np.sum(np.abs(cc.values) ** 2))
    dens = estimate_triple_norm(coeffs, psi, K, k_max, max_sites)
    return lhs, dens.sup_estimate * nphi ** 2


# --------------------------------------------------------------------------- #
#                              decay fits                                     #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class DecayFit:
    center: int
    rate: float
    r_squared: float
    points: int


def decay_fit(vector, sites=None, core: int = 2, floor: float = 1e-12,
              min_points: int = 10) -> DecayFit:
    """Least-squares fit of log|v(n)| against |n - c| outside a core around the peak.

    ``c`` is the site of largest modulus; sites with ``|n - c| <= core``
    and amplitudes below ``floor`` are excluded.  ``rate`` is the negated
    slope, so decaying vectors have positive rate.
    """
    if isinstance(vector, WavePacket):
        sites, vals = vector.sites, vector.amplitudes
    else:
        vals = np.asarray(vector)
        sites = np.arange(vals.size) if sites is None else np.asarray(sites)
    mod = np.abs(vals)
    c = int(sites[int(np.argmax(mod))])
    dist = np.abs(sites - c)
    keep = (dist > core) & (mod > floor)
    if keep.sum() < min_points:
        raise InsufficientTailError(f"only {int(keep.sum())} usable tail points (need {min_points})")
    fit = linregress(dist[keep].astype(np.float64), np.log(mod[keep]))
    return DecayFit(c, float(-fit.slope), float(fit.rvalue ** 2), int(keep.sum()))


def localization_fraction(es: EigenSystem, min_rate: float = 0.05,
                          min_r2: float = 0.8) -> tuple[float, list[DecayFit | None]]:
    """Fraction of eigenvectors with decay rate > min_rate and R^2 > min_r2."""
    fits: list[DecayFit | None] = []
    good = 0
    for j in range(es.size):
        try:
            fit = decay_fit(es.vectors[:, j], es.sites)
        except InsufficientTailError:
            fits.append(None)
            continue
        fits.append(fit)
        good += fit.rate > min_rate and fit.r_squared > min_r2
    return good / es.size, fits
