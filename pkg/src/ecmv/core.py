"""Extended CMV operators in LM-factored, banded form.

Index conventions (fixed once, used everywhere):

* ``Theta(alpha_j)`` acts on the sites ``{j, j+1}``.
* ``L`` is the direct sum of ``Theta(alpha_{2n})`` on ``{2n, 2n+1}``,
  ``M`` the direct sum of ``Theta(alpha_{2n+1})`` on ``{2n+1, 2n+2}``, and
  ``E = L M``.  Site 0 therefore sits in the M-block ``{-1, 0}`` and the
  L-block ``{0, 1}``.
* Operator windows ``[lo, hi]`` are inclusive with ``lo`` even and ``hi``
  odd, so L-blocks tile the window exactly and only the two M-blocks
  ``{lo-1, lo}`` and ``{hi, hi+1}`` straddle its edges.

Nothing here ever materialises a dense matrix except ``dense*`` helpers,
which exist as test oracles.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

UNIMODULAR_TOL = 1e-12


class WindowOverflowError(ValueError):
    """A packet does not fit inside an operator window with the required slack."""


class CoefficientDomainError(ValueError):
    """A Verblunsky coefficient lies outside the closed/open unit disk."""


# --------------------------------------------------------------------------- #
#                          coefficient sequences                              #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class VerblunskySequence:
    """Two-sided sequence of Verblunsky coefficients.

    ``func`` maps an integer ndarray of indices to a complex ndarray of the
    same shape.  ``period``, when given, must be a positive even integer;
    it is spot-checked on ``[-64, 64]`` at construction.  Unimodular values
    are only accepted when ``allow_unimodular`` is set (truncation-style
    decoupling sequences).
    """

    func: Callable[[np.ndarray], np.ndarray]
    description: str = "custom"
    period: int | None = None
    allow_unimodular: bool = False

    def __post_init__(self):
        if self.period is not None:
            if self.period <= 0 or self.period % 2:
                raise ValueError("period must be a positive even integer")
            # shifted indices must stay representable as int64
            if self.period > (1 << 62):
                return
            n = np.arange(-64, 65)
            a, b = self._raw(n), self._raw(n + self.period)
            if not np.allclose(a, b, rtol=0.0, atol=1e-12):
                raise ValueError(f"sequence {self.description!r} is not {self.period}-periodic")

    def _raw(self, n: np.ndarray) -> np.ndarray:
        return np.asarray(self.func(np.asarray(n, dtype=np.int64)), dtype=np.complex128)

    def values(self, lo: int, hi: int) -> np.ndarray:
        """Coefficients ``alpha_lo, ..., alpha_hi`` (inclusive), validated."""
        vals = self._raw(np.arange(lo, hi + 1)) if hi >= lo else np.zeros(0, complex)
        self._check(vals)
        return vals

    def _check(self, vals: np.ndarray) -> None:
        mod = np.abs(vals)
        if self.allow_unimodular:
            bad = mod > 1.0 + UNIMODULAR_TOL
        else:
            bad = mod >= 1.0
        if np.any(bad):
            raise CoefficientDomainError(
                f"{self.description}: coefficient of modulus {mod[bad].max():.17g} outside the disk"
            )

    def __call__(self, n):
        scalar = np.ndim(n) == 0
        vals = self._raw(np.atleast_1d(n))
        self._check(vals)
        return complex(vals[0]) if scalar else vals


def tabulated_sequence(table: dict[int, complex], description: str = "table",
                       period: int | None = None) -> VerblunskySequence:
    """Sequence backed by a finite table ``{n: alpha_n}``.

    With ``period`` set, indices outside the table are reduced modulo the
    period; otherwise looking up an uncovered index raises ``KeyError``.
    """
    data = {int(k): complex(v) for k, v in table.items()}

    def func(n):
        out = np.empty(n.shape, dtype=np.complex128)
        for i, idx in np.ndenumerate(n):
            key = int(idx)
            if key not in data and period is not None:
                key = min(data) + (key - min(data)) % period
            if key not in data:
                raise KeyError(f"coefficient table {description!r} does not cover index {int(idx)}")
            out[i] = data[key]
        return out

    return VerblunskySequence(func, description, period)


def load_coefficients_csv(path, period: int | None = None) -> VerblunskySequence:
    """Read a coefficient table with columns ``n, re, im``."""
    table = {}
    with open(path, newline="") as fh:
        rows = (r for r in fh if not r.lstrip().startswith("#"))
        for row in csv.DictReader(rows):
            table[int(row["n"])] = complex(float(row["re"]), float(row["im"]))
    if not table:
        raise ValueError(f"{path}: empty coefficient table")
    return tabulated_sequence(table, description=f"csv:{path}", period=period)


def rho_of(alpha) -> np.ndarray:
    """sqrt(1 - |alpha|^2), clipped at zero for unimodular entries."""
    a2 = np.abs(alpha) ** 2
    return np.sqrt(np.clip(1.0 - a2, 0.0, None))


def theta_block(alpha: complex) -> np.ndarray:
    """The 2x2 block [[conj(a), rho], [rho, -a]]."""
    alpha = complex(alpha)
    if abs(alpha) > 1.0 + UNIMODULAR_TOL:
        raise CoefficientDomainError(f"|alpha| = {abs(alpha)} > 1")
    rho = float(rho_of(alpha))
    return np.array([[alpha.conjugate(), rho], [rho, -alpha]], dtype=np.complex128)


# --------------------------------------------------------------------------- #
#                               wave packets                                  #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class WavePacket:
    """Finitely supported vector: ``amplitudes[i]`` lives on site ``offset + i``."""

    offset: int
    amplitudes: np.ndarray

    def __post_init__(self):
        amps = np.ascontiguousarray(self.amplitudes, dtype=np.complex128)
        if amps.ndim != 1:
            raise ValueError("amplitudes must be one-dimensional")
        object.__setattr__(self, "offset", int(self.offset))
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def delta(cls, n: int = 0) -> "WavePacket":
        return cls(n, np.ones(1, dtype=np.complex128))

    @classmethod
    def from_sites(cls, sites, values) -> "WavePacket":
        sites = np.asarray(sites, dtype=np.int64)
        lo, hi = int(sites.min()), int(sites.max())
        amps = np.zeros(hi - lo + 1, dtype=np.complex128)
        np.add.at(amps, sites - lo, np.asarray(values, dtype=np.complex128))
        return cls(lo, amps)

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + self.amplitudes.size - 1

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def support(self) -> tuple[int, int] | None:
        """Smallest ``(first, last)`` site carrying a nonzero amplitude."""
        nz = np.flatnonzero(self.amplitudes)
        if nz.size == 0:
            return None
        return self.offset + int(nz[0]), self.offset + int(nz[-1])

    def on_window(self, lo: int, hi: int) -> np.ndarray:
        """Amplitudes on ``[lo, hi]``; the window must contain the support."""
        out = np.zeros(hi - lo + 1, dtype=np.complex128)
        a, b = max(lo, self.lo), min(hi, self.hi)
        if a <= b:
            out[a - lo:b - lo + 1] = self.amplitudes[a - self.lo:b - self.lo + 1]
        sup = self.support()
        if sup is not None and (sup[0] < lo or sup[1] > hi):
            raise WindowOverflowError(f"support {sup} not inside [{lo}, {hi}]")
        return out

    def extended(self, lo: int, hi: int) -> "WavePacket":
        lo, hi = min(lo, self.lo), max(hi, self.hi)
        return WavePacket(lo, self.on_window(lo, hi))

    def _combine(self, other: "WavePacket", sign: float) -> "WavePacket":
        lo, hi = min(self.lo, other.lo), max(self.hi, other.hi)
        return WavePacket(lo, self.on_window(lo, hi) + sign * other.on_window(lo, hi))

    def __add__(self, other):
        return self._combine(other, 1.0)

    def __sub__(self, other):
        return self._combine(other, -1.0)

    def __mul__(self, c):
        return WavePacket(self.offset, self.amplitudes * c)

    __rmul__ = __mul__

    def inner(self, other: "WavePacket") -> complex:
        """<self, other>, antilinear in ``self``."""
        a, b = max(self.lo, other.lo), min(self.hi, other.hi)
        if a > b:
            return 0j
        x = self.amplitudes[a - self.lo:b - self.lo + 1]
        y = other.amplitudes[a - other.lo:b - other.lo + 1]
        return complex(np.vdot(x, y))

    def position(self, center: float = 0.0) -> "WavePacket":
        """(X - center) applied to the packet."""
        return WavePacket(self.offset, (self.sites - center) * self.amplitudes)

    def amplitude(self, n: int) -> complex:
        if self.lo <= n <= self.hi:
            return complex(self.amplitudes[n - self.lo])
        return 0j


# --------------------------------------------------------------------------- #
#                               operators                                     #
# --------------------------------------------------------------------------- #


def aligned_window(lo: int, hi: int) -> tuple[int, int]:
    """Smallest block-aligned window (even lo, odd hi) containing [lo, hi]."""
    lo -= lo % 2
    if hi % 2 == 0:
        hi += 1
    return lo, hi


def _pair_layer(x, y, a, rho, adjoint: bool):
    """Apply Theta(a) (or its adjoint) to the stacked pairs (x, y)."""
    if x.ndim == 2:
        a, rho = a[:, None], rho[:, None]
    if adjoint:
        return a * x + rho * y, rho * x - np.conj(a) * y
    return np.conj(a) * x + rho * y, rho * x - a * y


@dataclass(frozen=True, eq=False)
class ECMVOperator:
    """E = L M restricted to the aligned window ``[lo, hi]``.

    ``alpha``/``rho`` hold coefficients for indices ``lo-1 .. hi``.  For a
    finite truncation (``finite=True``) the two straddling coefficients
    ``alpha_{lo-1}`` and ``alpha_hi`` are the unimodular ``boundary_phase``
    and the operator is exactly unitary on l^2([lo, hi]).  Otherwise the
    window is a slab of the two-sided operator and ``apply`` insists on
    two sites of zero slack on each side of the packet.
    """

    coeffs: VerblunskySequence
    lo: int
    hi: int
    boundary_phase: complex | None = None
    alpha: np.ndarray = field(repr=False, default=None)
    rho: np.ndarray = field(repr=False, default=None)

    @property
    def finite(self) -> bool:
        return self.boundary_phase is not None

    @property
    def size(self) -> int:
        return self.hi - self.lo + 1

    @property
    def window(self) -> tuple[int, int]:
        return self.lo, self.hi

    def _coeff_slice(self, lo: int, hi: int):
        """alpha/rho for indices lo-1 .. hi."""
        i0 = lo - 1 - (self.lo - 1)
        i1 = hi - (self.lo - 1) + 1
        return self.alpha[i0:i1], self.rho[i0:i1]

    # -- kernels ------------------------------------------------------------ #

    def _apply_array(self, v: np.ndarray, lo: int, inverse: bool = False) -> np.ndarray:
        """Compressed E (or E^{-1}) on an aligned sub-window starting at ``lo``.

        ``v`` has shape (L,) or (L, k) with L even.  The edge sites only
        receive the diagonal part of their straddling M-block, so the result
        is exact whenever those sites carry zero amplitude (whole-line slab)
        or the straddling blocks are decoupled (finite truncation).
        """
        n = v.shape[0]
        hi = lo + n - 1
        a, r = self._coeff_slice(lo, hi)
        # a[0] = alpha_{lo-1}; a[1 + i] = alpha_{lo + i}
        a_even, r_even = a[1::2], r[1::2]           # lo, lo+2, ..., hi-1
        a_odd, r_odd = a[2:-1:2], r[2:-1:2]         # lo+1, ..., hi-2
        out = np.array(v, dtype=np.complex128, copy=True)

        def layer_l(w):
            x, y = _pair_layer(w[0::2], w[1::2], a_even, r_even, inverse)
            w[0::2], w[1::2] = x, y

        def layer_m(w):
            x, y = _pair_layer(w[1:-1:2], w[2:-1:2], a_odd, r_odd, inverse)
            w[1:-1:2], w[2:-1:2] = x, y
            left, right = a[0], a[-1]
            if inverse:
                w[0] *= -np.conj(left)
                w[-1] *= right
            else:
                w[0] *= -left
                w[-1] *= np.conj(right)

        if inverse:   # E^{-1} = M* L*
            layer_l(out)
            layer_m(out)
        else:
            layer_m(out)
            layer_l(out)
        return out

    def apply(self, psi: WavePacket, direction: str = "forward") -> WavePacket:
        """E psi (``direction="forward"``) or E^{-1} psi (``"inverse"``)."""
        if direction not in ("forward", "inverse"):
            raise ValueError(f"unknown direction {direction!r}")
        lo, hi = aligned_window(psi.lo - 2, psi.hi + 2)
        if self.finite:
            if psi.lo < self.lo or psi.hi > self.hi:
                sup = psi.support()
                if sup is not None and (sup[0] < self.lo or sup[1] > self.hi):
                    raise WindowOverflowError(f"packet {sup} outside truncation {self.window}")
            lo, hi = max(lo, self.lo), min(hi, self.hi)
        elif lo < self.lo or hi > self.hi:
            raise WindowOverflowError(
                f"packet [{psi.lo}, {psi.hi}] needs window [{lo}, {hi}] inside operator window "
                f"{self.window}"
            )
        v = psi.on_window(lo, hi)
        return WavePacket(lo, self._apply_array(v, lo, inverse=direction == "inverse"))

    # -- dense oracles ------------------------------------------------------ #

    def dense(self) -> np.ndarray:
        """Matrix of the compressed operator, columns produced by the banded kernel."""
        return self._apply_array(np.eye(self.size, dtype=np.complex128), self.lo)

    def dense_L(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=np.complex128)
        for j in range(self.lo, self.hi, 2):
            i = j - self.lo
            out[i:i + 2, i:i + 2] = theta_block(self.alpha[j - self.lo + 1])
        return out

    def dense_M(self) -> np.ndarray:
        out = np.zeros((self.size, self.size), dtype=np.complex128)
        for j in range(self.lo - 1, self.hi + 1, 2):
            blk = theta_block(self.alpha[j - self.lo + 1])
            if self.finite and j in (self.lo - 1, self.hi):
                # decoupled boundary block: rho is exactly zero
                blk[0, 1] = blk[1, 0] = 0.0
            for r, sr in enumerate((j, j + 1)):
                for c, sc in enumerate((j, j + 1)):
                    if self.lo <= sr <= self.hi and self.lo <= sc <= self.hi:
                        out[sr - self.lo, sc - self.lo] = blk[r, c]
        return out

    def position_diag(self) -> np.ndarray:
        return np.arange(self.lo, self.hi + 1, dtype=np.float64)


def build_ecmv(coeffs: VerblunskySequence, window: tuple[int, int]) -> ECMVOperator:
    """Whole-line ECMV operator on the slab ``window`` (aligned outward)."""
    lo, hi = aligned_window(*window)
    if hi - lo + 1 < 2:
        raise ValueError("window too small to contain a Theta block")
    alpha = coeffs.values(lo - 1, hi)
    return ECMVOperator(coeffs, lo, hi, None, alpha, rho_of(alpha))


def truncate(coeffs: VerblunskySequence, window: tuple[int, int], eta: complex = 1.0) -> ECMVOperator:
    """Finite unitary section on ``window`` decoupled by the boundary phase ``eta``.

    The window must already be block aligned (even ``lo``, odd ``hi``).
    """
    lo, hi = window
    eta = complex(eta)
    if abs(abs(eta) - 1.0) > UNIMODULAR_TOL:
        raise ValueError(f"boundary phase must be unimodular, got |eta| = {abs(eta)}")
    if lo % 2 or hi % 2 == 0:
        raise ValueError(f"window [{lo}, {hi}] not aligned with Theta blocks (need even lo, odd hi)")
    if hi - lo + 1 < 2:
        raise ValueError("window too small to contain a Theta block")
    alpha = np.empty(hi - lo + 2, dtype=np.complex128)
    alpha[1:-1] = coeffs.values(lo, hi - 1)
    alpha[0] = alpha[-1] = eta
    rho = rho_of(alpha)
    rho[0] = rho[-1] = 0.0
    return ECMVOperator(coeffs, lo, hi, eta, alpha, rho)


def centered_window(n_sites: int) -> tuple[int, int]:
    """Block-aligned window of ``n_sites`` (even) sites around the origin."""
    if n_sites < 2 or n_sites % 2:
        raise ValueError(f"truncation size must be an even integer >= 2, got {n_sites}")
    lo = -2 * (n_sites // 4)
    return lo, lo + n_sites - 1
