"""Coefficient families: the unitary almost-Mathieu operator (UAMO), its
rank-two perturbation at indices 0 and 1, and free/constant/random
reference families used as oracles and contrast cases.

A note on the frequency bookkeeping: the coefficient formula advances the
phase by ``Phi`` per *pair* of indices (``alpha_{2n-1}`` uses ``n*Phi``),
which is the same as the ergodic skew-shift ``(theta, j) -> (theta + Phi/2,
j + 1)`` on ``T x Z_2`` read one index at a time.  Only the explicit
coefficient formula is used for computation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache

import numpy as np

from .core import VerblunskySequence
from .dyadic import DyadicRational

Frequency = DyadicRational | Fraction | float

_INT64_SAFE = 1 << 62


def as_fraction(phi: Frequency) -> Fraction | None:
    """Exact value of a rational frequency, ``None`` for floats."""
    if isinstance(phi, DyadicRational):
        return phi.to_fraction()
    if isinstance(phi, Fraction):
        return phi
    if isinstance(phi, int):
        return Fraction(phi)
    return None


@dataclass(frozen=True)
class UAMOParams:
    """Coupling constants ``lambda1, lambda2`` in [0, 1], frequency and phase."""

    lambda1: float
    lambda2: float
    phi: Frequency = Fraction(0)
    theta: float = 0.0

    def __post_init__(self):
        for name in ("lambda1", "lambda2"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise ValueError(f"{name} must lie in [0, 1], got {v}")

    @property
    def supercritical(self) -> bool:
        return self.lambda1 < self.lambda2

    @property
    def lambda1_prime(self) -> float:
        return math.sqrt(1.0 - self.lambda1 ** 2)

    @property
    def lambda2_prime(self) -> float:
        return math.sqrt(1.0 - self.lambda2 ** 2)

    def with_phi(self, phi: Frequency) -> "UAMOParams":
        return UAMOParams(self.lambda1, self.lambda2, phi, self.theta)

    def with_theta(self, theta: float) -> "UAMOParams":
        return UAMOParams(self.lambda1, self.lambda2, self.phi, theta)


@dataclass(frozen=True)
class PerturbationParams:
    beta0: complex
    beta1: complex

    def __post_init__(self):
        for name in ("beta0", "beta1"):
            v = complex(getattr(self, name))
            if abs(v) >= 1.0:
                raise ValueError(f"{name} must lie in the open unit disk, got {v}")
            object.__setattr__(self, name, v)


def _frac_part(n: np.ndarray, phi: Frequency) -> np.ndarray:
    """{n * phi} as float64, computed exactly for rational ``phi``.

    Exact reduction modulo one makes rational-frequency sequences periodic
    bit for bit, independent of how large ``n`` gets.
    """
    exact = as_fraction(phi)
    if exact is None:
        return np.mod(n * float(phi), 1.0)
    p, q = exact.numerator % exact.denominator, exact.denominator
    if q * (int(np.abs(n).max(initial=0)) + 1) < _INT64_SAFE:
        r = np.mod(n * p, q)
        return r / float(q)
    flat = [float(Fraction((int(k) * p) % q, q)) for k in n.ravel()]
    return np.asarray(flat, dtype=np.float64).reshape(n.shape)


def uamo_period(phi: Frequency) -> int | None:
    exact = as_fraction(phi)
    if exact is None:
        return None
    return 2 * exact.denominator


def uamo_coeffs(params: UAMOParams) -> VerblunskySequence:
    """alpha_{2n-1} = lambda2 sin 2pi(n Phi + theta), alpha_{2n} = lambda1'."""
    lam2, l1p, phi, theta = params.lambda2, params.lambda1_prime, params.phi, params.theta

    def func(idx: np.ndarray) -> np.ndarray:
        out = np.full(idx.shape, l1p, dtype=np.complex128)
        odd = idx % 2 == 1
        if np.any(odd):
            n = (idx[odd] + 1) // 2
            out[odd] = lam2 * np.sin(2.0 * np.pi * (_frac_part(n, phi) + theta))
        return out

    desc = f"uamo(lambda1={params.lambda1}, lambda2={lam2}, phi={phi}, theta={theta})"
    return VerblunskySequence(func, desc, uamo_period(phi))


def uamo_sampling(params: UAMOParams, theta: float, j: int) -> float:
    """Sampling function of the skew-shift description on T x Z_2."""
    if j % 2 == 0:
        return params.lambda2 * math.sin(2.0 * math.pi * theta)
    return params.lambda1_prime


def perturb(base: VerblunskySequence, pert: PerturbationParams) -> VerblunskySequence:
    """Replace alpha_0 and alpha_1 by beta_0 and beta_1; the period is dropped."""
    b0, b1 = pert.beta0, pert.beta1

    def func(idx: np.ndarray) -> np.ndarray:
        out = np.asarray(base.func(idx), dtype=np.complex128).copy()
        out[idx == 0] = b0
        out[idx == 1] = b1
        return out

    return VerblunskySequence(func, f"{base.description} + beta=({b0}, {b1})", None,
                              base.allow_unimodular)


def uamo_variation(params: UAMOParams, pert: PerturbationParams | None = None) -> VerblunskySequence:
    """The perturbed family E_{Phi, theta, beta0, beta1}; ``pert=None`` keeps the UAMO."""
    base = uamo_coeffs(params)
    return base if pert is None else perturb(base, pert)


# --------------------------------------------------------------------------- #
#                          reference families                                 #
# --------------------------------------------------------------------------- #


def free_coeffs() -> VerblunskySequence:
    return VerblunskySequence(lambda n: np.zeros(n.shape, np.complex128), "free", 2)


def constant_coeffs(alpha: complex) -> VerblunskySequence:
    alpha = complex(alpha)
    if abs(alpha) >= 1.0:
        raise ValueError("constant coefficient must lie in the open unit disk")
    return VerblunskySequence(lambda n: np.full(n.shape, alpha, np.complex128),
                              f"constant({alpha})", 2)


def unimodular_coeffs(eta: complex = 1.0) -> VerblunskySequence:
    """All coefficients equal to a unimodular ``eta``: E is diagonal (frozen dynamics)."""
    return VerblunskySequence(lambda n: np.full(n.shape, complex(eta), np.complex128),
                              f"unimodular({complex(eta)})", 2, allow_unimodular=True)


_BLOCK = 1024


@lru_cache(maxsize=4096)
def _random_block(seed: int, block: int, radius: float) -> np.ndarray:
    key = 2 * block if block >= 0 else -2 * block - 1
    rng = np.random.default_rng([seed, key])
    r = radius * np.sqrt(rng.random(_BLOCK))
    ang = 2.0 * np.pi * rng.random(_BLOCK)
    out = r * np.exp(1j * ang)
    out.setflags(write=False)
    return out


def random_coeffs(seed: int, radius: float = 0.9, law: str = "disk") -> VerblunskySequence:
    """i.i.d. coefficients, uniform on the disk of the given radius.

    Index ``n`` is drawn from block ``n // 1024`` of a generator seeded by
    ``(seed, block)``, so any window is reproducible without generating
    everything to its left.
    """
    if law != "disk":
        raise ValueError(f"unknown random law {law!r}")
    if not 0.0 <= radius < 1.0:
        raise ValueError("radius must lie in [0, 1)")

    def func(idx: np.ndarray) -> np.ndarray:
        flat = idx.ravel()
        blocks = np.floor_divide(flat, _BLOCK)
        out = np.empty(flat.shape, np.complex128)
        for b in np.unique(blocks):
            sel = blocks == b
            out[sel] = _random_block(int(seed), int(b), float(radius))[flat[sel] - b * _BLOCK]
        return out.reshape(idx.shape)

    return VerblunskySequence(func, f"random(seed={seed}, radius={radius})")


def reference_family(kind: str, alpha: complex = 0j, seed: int = 0,
                     radius: float = 0.9) -> VerblunskySequence:
    """``free`` | ``constant`` | ``random`` coefficient sequences."""
    if kind == "free":
        return free_coeffs()
    if kind == "constant":
        return constant_coeffs(alpha)
    if kind == "random":
        return random_coeffs(seed, radius)
    raise ValueError(f"unknown reference family {kind!r}")
