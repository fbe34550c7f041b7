"""Stage-by-stage construction of a frequency with almost-ballistic transport.

Each stage m starts from a dyadic frequency Phi_m and

1. splits delta_0 = phi + psi with psi the band-projected part, over a grid
   of phases theta and rank-two perturbations (beta0, beta1), giving
   C1 = min ||psi|| and C2 = max |||psi|||;
2. doubles T until C1^2 - 3 sqrt(2 C2^2 / f(T)^{1/5}) >= 2 / f(T)^{2/5};
3. checks by direct simulation that the tail average at Phi_m is at least
   2 / f(T)^{2/5} on the whole grid;
4. sets Delta = 1 / (16 pi lambda2 T^2 f(T)^{2/5}), which by the Duhamel
   bound keeps the tail average above 1 / f(T)^{2/5} for |Phi - Phi_m| < Delta;
5. picks the least k > k_{m-1} with |Phi_m + 2^{-k!} - Phi_j| < Delta_j for
   every earlier stage j, in exact arithmetic, and moves to Phi_m + 2^{-k!}.

Every inequality is recorded with its slack so a ledger can be re-checked
from its JSON form alone.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.optimize import brentq

from . import __version__
from .core import WavePacket, centered_window, truncate
from .dynamics import (
    DEFAULT_MAX_SITES,
    GrowthFunction,
    SiteProjection,
    criterion_cutoff,
    criterion_rhs,
    light_cone_operator,
    projected_mass_average,
    tail_average,
    trajectory,
)
from .dyadic import DyadicRational
from .floquet import BandInterval, band_arc
from .models import (
    Frequency,
    PerturbationParams,
    UAMOParams,
    as_fraction,
    uamo_coeffs,
    uamo_period,
    uamo_variation,
)
from .spectral import StabilizedDensity, arc_projection, diagonalize, estimate_triple_norm


class CapExceededError(RuntimeError):
    """A configured cap stopped the construction; ``inequality`` names what failed."""

    def __init__(self, inequality: str, detail: str, **data):
        super().__init__(f"{inequality}: {detail}")
        self.inequality = inequality
        self.detail = detail
        self.data = data


class CriterionViolation(RuntimeError):
    """Direct simulation at Phi_m fell short of the required tail average."""

    def __init__(self, detail: str, **data):
        super().__init__(detail)
        self.detail = detail
        self.data = data


# --------------------------------------------------------------------------- #
#                               Duhamel                                       #
# --------------------------------------------------------------------------- #


def _exact(phi: Frequency) -> Fraction:
    exact = as_fraction(phi)
    return Fraction(float(phi)) if exact is None else exact


def duhamel_bound(phi1: Frequency, phi2: Frequency, lambda2: float, t: float) -> float:
    """min(2 pi lambda2 |Phi1 - Phi2| t^2, 2)."""
    if t < 0:
        raise ValueError("t must be nonnegative")
    d = abs(_exact(phi1) - _exact(phi2))
    return min(2.0 * math.pi * lambda2 * float(d) * t * t, 2.0)


def duhamel_measured(params1: UAMOParams, params2: UAMOParams, pert: PerturbationParams | None,
                     tmax: int, max_sites: int = DEFAULT_MAX_SITES) -> np.ndarray:
    """||E_1^t delta_0 - E_2^t delta_0|| for t = 0..tmax; models differ only in Phi."""
    if (params1.lambda1, params1.lambda2, params1.theta) != (params2.lambda1, params2.lambda2,
                                                              params2.theta):
        raise ValueError("the two models may differ only in the frequency")
    d0 = WavePacket.delta(0)
    ops = [light_cone_operator(uamo_variation(p, pert), 0, 0, tmax, max_sites)
           for p in (params1, params2)]
    return np.array([(a - b).norm() for a, b in zip(trajectory(ops[0], d0, tmax),
                                                    trajectory(ops[1], d0, tmax))])


# --------------------------------------------------------------------------- #
#                      band-projected decomposition                           #
# --------------------------------------------------------------------------- #


def truncation_size(phi: Frequency, periods: int = 16, buffer: int = 100) -> int:
    """``periods`` full periods plus a buffer, rounded up to a multiple of four."""
    period = uamo_period(phi)
    if period is None:
        raise ValueError("decomposition needs a rational frequency")
    n = periods * period + buffer
    return n + (-n) % 4


@dataclass(frozen=True)
class Decomposition:
    """delta_0 = phi + psi with psi = chi_I(E) delta_0 on a truncation."""

    phi: WavePacket
    psi: WavePacket
    arc: BandInterval
    density: StabilizedDensity | None
    size: int

    @property
    def norm_psi(self) -> float:
        return self.psi.norm()

    @property
    def triple_norm(self) -> float:
        return math.nan if self.density is None else self.density.triple_norm


def project_delta(params: UAMOParams, pert: PerturbationParams | None, arc: BandInterval,
                  size: int) -> WavePacket:
    """chi_arc(E_N) delta_0 for the size-N truncation of the (perturbed) model."""
    if arc.length >= 2.0 * math.pi:
        return WavePacket.delta(0)
    op = truncate(uamo_variation(params, pert), centered_window(size))
    return arc_projection(diagonalize(op), arc, WavePacket.delta(0))


def decompose(phi: Frequency, model: UAMOParams, theta: float, pert: PerturbationParams | None,
              size: int | None = None, arc: BandInterval | None = None, density: bool = True,
              K: int = 256, k_max: int = 1024) -> Decomposition:
    """Split delta_0 along the band arc I_theta of the unperturbed periodic model.

    ``arc`` overrides the band arc (a full-circle arc gives psi = delta_0).
    """
    params = UAMOParams(model.lambda1, model.lambda2, phi, theta)
    if arc is None:
        arc = band_arc(uamo_coeffs(params), theta)
    n = truncation_size(phi) if size is None else size
    psi = project_delta(params, pert, arc, n)
    dens = estimate_triple_norm(uamo_variation(params, pert), psi, K, k_max) if density else None
    return Decomposition(WavePacket.delta(0) - psi, psi, arc, dens, n)


def truncation_drift(phi: Frequency, model: UAMOParams, theta: float,
                     pert: PerturbationParams | None, size: int) -> float:
    """||psi_N - psi_2N||: how much the projected vector moves when N doubles."""
    params = UAMOParams(model.lambda1, model.lambda2, phi, theta)
    arc = band_arc(uamo_coeffs(params), theta)
    a = project_delta(params, pert, arc, size)
    b = project_delta(params, pert, arc, 2 * size)
    return (a - b).norm()


def breakdown_check(coeffs, proj: SiteProjection, phi_vec: WavePacket, psi_vec: WavePacket,
                    T: int, max_sites: int = DEFAULT_MAX_SITES) -> tuple[float, float]:
    """Both sides of the projection-splitting inequality for delta = phi + psi.

    lhs = (1/T) sum_{t=T}^{2T-1} ||(1 - P) U^t delta||^2,
    rhs = ||psi||^2 - 3 ((1/T) sum ||P U^t psi||^2)^{1/2}.
    """
    delta = phi_vec + psi_vec
    lhs = delta.norm() ** 2 - projected_mass_average(coeffs, proj, delta, T, max_sites)
    inner = projected_mass_average(coeffs, proj, psi_vec, T, max_sites)
    rhs = psi_vec.norm() ** 2 - 3.0 * math.sqrt(max(inner, 0.0))
    return lhs, rhs


# --------------------------------------------------------------------------- #
#                         scalar stage choices                                #
# --------------------------------------------------------------------------- #


def choose_t_margin(C1: float, C2: float, f_value: float) -> float:
    """C1^2 - 3 sqrt(2 C2^2 / f^{1/5}) - 2 / f^{2/5}."""
    if math.isinf(C2):
        return -math.inf
    return C1 * C1 - 3.0 * math.sqrt(2.0 * C2 * C2 / f_value ** 0.2) - 2.0 / f_value ** 0.4


def required_f_level(C1: float, C2: float) -> float:
    """Least f with nonnegative choose_T margin (infinite if none).

    With u = f^{-1/10} the margin is C1^2 - 3 sqrt(2) C2 u - 2 u^4, decreasing in u.
    """
    if C1 <= 0.0 or math.isinf(C2):
        return math.inf
    g = lambda u: C1 * C1 - 3.0 * math.sqrt(2.0) * C2 * u - 2.0 * u ** 4
    hi = 1.0
    while g(hi) > 0:
        hi *= 2.0
    u = brentq(g, 0.0, hi, xtol=1e-300, rtol=1e-15)
    return u ** -10 if u > 0 else math.inf


def choose_T(C1: float, C2: float, f: GrowthFunction, T_prev: int = 0, T_cap: int = 1 << 20) -> int:
    """Least T = 2^j max(2, 2 T_prev) with a nonnegative choose_T margin."""
    T = max(2, 2 * T_prev)
    while T <= T_cap:
        try:
            fv = f(T)
        except ValueError:
            break
        if choose_t_margin(C1, C2, fv) >= 0.0:
            return T
        T *= 2
    need = required_f_level(C1, C2)
    raise CapExceededError(
        "C1^2 - 3 sqrt(2 C2^2 / f(T)^{1/5}) >= 2 / f(T)^{2/5}",
        f"no T <= {T_cap} on the doubling ladder from {max(2, 2 * T_prev)}; "
        f"needs f(T) >= {need:.6g} (C1 = {C1:.6g}, C2 = {C2:.6g})",
        required_f=need, T_cap=T_cap, C1=C1, C2=C2)


def choose_delta(T: int, lambda2: float, f: GrowthFunction) -> float:
    """1 / (16 pi lambda2 T^2 f(T)^{2/5}), capped at 1/4."""
    if T < 1:
        raise ValueError("T must be >= 1")
    if lambda2 <= 0.0:
        return 0.25
    return min(1.0 / (16.0 * math.pi * lambda2 * T * T * f(T) ** 0.4), 0.25)


def item_iii_slacks(phi_next: DyadicRational, phis: Sequence[DyadicRational],
                    deltas: Sequence[float]) -> list[Fraction]:
    """Delta_j - |Phi_{m+1} - Phi_j| exactly, for every earlier stage j."""
    nxt = phi_next.to_fraction()
    return [Fraction(d) - abs(nxt - p.to_fraction()) for p, d in zip(phis, deltas)]


def choose_k(phis: Sequence[DyadicRational], deltas: Sequence[float], k_prev: int,
             factorial_cap: int) -> int:
    """Least k > k_prev with k! <= cap such that Phi_m + 2^{-k!} satisfies item (iii)."""
    k = k_prev + 1
    while math.factorial(k) <= factorial_cap:
        nxt = phis[-1] + DyadicRational.power_of_two(-math.factorial(k))
        if all(s > 0 for s in item_iii_slacks(nxt, phis, deltas)):
            return k
        k += 1
    allowed = [j for j in range(k_prev + 1, k)]
    smallest = (f"2^-{math.factorial(allowed[-1])}" if allowed else "none (no k fits the cap)")
    raise CapExceededError(
        "|Phi_(m+1) - Phi_j| < Delta_j for all j <= m",
        f"needs 2^(-k!) below about {min(deltas):.6g}; smallest increment with k > {k_prev} "
        f"and k! <= {factorial_cap} is {smallest}",
        factorial_cap=factorial_cap, k_prev=k_prev)


# --------------------------------------------------------------------------- #
#                              the ledger                                     #
# --------------------------------------------------------------------------- #


DEFAULT_BETAS = (0j, 0.5, -0.5, 0.5j, -0.5j)


@dataclass(frozen=True)
class Caps:
    T: int = 1 << 16
    truncation: int = 4096
    factorial: int = 12
    max_sites: int = DEFAULT_MAX_SITES

    def to_json(self) -> dict:
        return {"T": self.T, "truncation": self.truncation, "factorial": self.factorial,
                "maxSites": self.max_sites}

    @classmethod
    def from_json(cls, d: dict) -> "Caps":
        return cls(int(d["T"]), int(d["truncation"]), int(d["factorial"]),
                   int(d.get("maxSites", DEFAULT_MAX_SITES)))


@dataclass(frozen=True)
class SampleGrid:
    thetas: tuple[float, ...]
    betas: tuple[complex, ...] = DEFAULT_BETAS

    @classmethod
    def uniform(cls, n_theta: int = 16, betas: Sequence[complex] = DEFAULT_BETAS) -> "SampleGrid":
        return cls(tuple(j / n_theta for j in range(n_theta)), tuple(complex(b) for b in betas))

    def points(self) -> list[tuple[float, PerturbationParams]]:
        return [(th, PerturbationParams(b0, b1))
                for th in self.thetas for b0 in self.betas for b1 in self.betas]

    def to_json(self) -> tuple[list, list]:
        return list(self.thetas), [[b.real, b.imag] for b in self.betas]


@dataclass
class Stage:
    index: int
    phi: DyadicRational
    T: int
    Delta: float
    k: int | None
    C1: float
    C2: float
    criterion_lhs: float
    criterion_rhs: float
    slacks: dict = field(default_factory=dict)
    diagnostics: dict = field(default_factory=dict)

    @property
    def tail_bound(self) -> float | None:
        """Distance bound 2^{-k!+1} from the next approximant to the limit frequency."""
        return None if self.k is None else 2.0 ** (-math.factorial(self.k) + 1)

    def to_json(self, grid: SampleGrid) -> dict:
        thetas, betas = grid.to_json()
        return {"stage": self.index, "phi": self.phi.to_json(), "T": self.T, "Delta": self.Delta,
                "k": self.k, "C1": self.C1, "C2": self.C2, "criterionLhs": self.criterion_lhs,
                "criterionRhs": self.criterion_rhs, "thetaGrid": thetas, "betaGrid": betas,
                "slacks": dict(self.slacks), "tailBound": self.tail_bound,
                "diagnostics": dict(self.diagnostics)}


@dataclass
class StageLedger:
    model: UAMOParams
    growth: GrowthFunction
    grid: SampleGrid
    caps: Caps
    stages: list[Stage] = field(default_factory=list)
    status: str = "complete"
    failure: dict | None = None

    def to_json(self) -> dict:
        thetas, betas = self.grid.to_json()
        return {"version": __version__,
                "model": {"lambda1": self.model.lambda1, "lambda2": self.model.lambda2},
                "growth": self.growth.describe(),
                "grids": {"theta": thetas, "beta": betas},
                "caps": self.caps.to_json(),
                "stages": [s.to_json(self.grid) for s in self.stages],
                "status": self.status, "failure": self.failure}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=2, sort_keys=True)


# --------------------------------------------------------------------------- #
#                            the construction                                 #
# --------------------------------------------------------------------------- #


@dataclass(frozen=True)
class _PointResult:
    theta: float
    pert: PerturbationParams
    decomposition: Decomposition


def _map(fn, items, workers: int):
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))


def _stage_constants(phi: DyadicRational, model: UAMOParams, grid: SampleGrid, size: int,
                     workers: int) -> list[_PointResult]:
    arcs = {th: band_arc(uamo_coeffs(UAMOParams(model.lambda1, model.lambda2, phi, th)), th)
            for th in grid.thetas}

    def run(point):
        th, pert = point
        return _PointResult(th, pert, decompose(phi, model, th, pert, size, arcs[th]))

    return _map(run, grid.points(), workers)


def _criterion_values(phi: Frequency, model: UAMOParams, grid: SampleGrid, T: int,
                      f: GrowthFunction, caps: Caps, workers: int) -> list[float]:
    cutoff = criterion_cutoff(T, f)

    def run(point):
        th, pert = point
        coeffs = uamo_variation(UAMOParams(model.lambda1, model.lambda2, phi, th), pert)
        return tail_average(coeffs, T, cutoff, max_sites=caps.max_sites)

    return _map(run, grid.points(), workers)


def construct_phi(model: UAMOParams, f: GrowthFunction, max_stages: int = 2,
                  caps: Caps = Caps(), grid: SampleGrid | None = None, workers: int = 1,
                  check_drift: bool = True) -> StageLedger:
    """Run the stage construction from Phi_1 = 0; failures end it with a partial ledger.

    ``status`` is ``complete``, ``cap-exceeded`` or ``criterion-violation``;
    ``failure`` then carries the stage and the inequality that failed.
    """
    if not model.supercritical:
        raise ValueError("construction needs a supercritical model (lambda1 < lambda2)")
    grid = SampleGrid.uniform() if grid is None else grid
    ledger = StageLedger(UAMOParams(model.lambda1, model.lambda2), f, grid, caps)
    phi = DyadicRational(0)
    T_prev, k_prev = 0, 0
    phis: list[DyadicRational] = []
    deltas: list[float] = []
    for m in range(1, max_stages + 1):
        try:
            stage = _run_stage(m, phi, model, f, grid, caps, T_prev, workers, check_drift)
            phis.append(phi)
            deltas.append(stage.Delta)
            ledger.stages.append(stage)
            if m == max_stages:
                break
            k = choose_k(phis, deltas, k_prev, caps.factorial)
        except CapExceededError as exc:
            ledger.status = "cap-exceeded"
            ledger.failure = {"stage": m, "inequality": exc.inequality, "detail": exc.detail}
            return ledger
        except CriterionViolation as exc:
            ledger.status = "criterion-violation"
            ledger.failure = {"stage": m, "inequality": "criterionLhs >= 2 / f(T)^{2/5}",
                              "detail": exc.detail}
            return ledger
        nxt = phi + DyadicRational.power_of_two(-math.factorial(k))
        stage.k = k
        stage.slacks["itemIII"] = float(min(item_iii_slacks(nxt, phis, deltas)))
        phi, T_prev, k_prev = nxt, stage.T, k
    return ledger


def _run_stage(m: int, phi: DyadicRational, model: UAMOParams, f: GrowthFunction,
               grid: SampleGrid, caps: Caps, T_prev: int, workers: int,
               check_drift: bool) -> Stage:
    size = truncation_size(phi)
    if size > caps.truncation:
        raise CapExceededError(
            "truncation >= 16 periods + buffer",
            f"Phi_{m} = {phi} has period {uamo_period(phi)}; needs N = {size} > cap {caps.truncation}",
            size=size)
    points = _stage_constants(phi, model, grid, size, workers)
    norms = [p.decomposition.norm_psi for p in points]
    trip = [p.decomposition.triple_norm for p in points]
    C1, C2 = min(norms), max(trip)
    T = choose_T(C1, C2, f, T_prev, caps.T)
    rhs2 = 2.0 * criterion_rhs(T, f)
    lhs_values = _criterion_values(phi, model, grid, T, f, caps, workers)
    worst = int(np.argmin(lhs_values))
    lhs = lhs_values[worst]
    if lhs < rhs2:
        th, pert = grid.points()[worst]
        raise CriterionViolation(
            f"stage {m}: tail average {lhs:.17g} < 2 / f(T)^(2/5) = {rhs2:.17g} at T = {T}, "
            f"theta = {th}, beta = ({pert.beta0}, {pert.beta1})", lhs=lhs, rhs=rhs2)
    delta = choose_delta(T, model.lambda2, f)
    slacks = {"chooseT": choose_t_margin(C1, C2, f(T)), "criterion": lhs - rhs2}
    slacks.update(_stage_audit(phi, model, f, T, delta, points, worst, C2, caps))
    diagnostics = {"truncation": size, "criterionWorstPoint": worst,
                   "densityUnstable": sum(1 for p in points
                                          if p.decomposition.density is not None
                                          and not p.decomposition.density.stable)}
    if check_drift:
        th0 = grid.thetas[0]
        diagnostics["truncationDrift"] = truncation_drift(phi, model, th0, None, size)
    return Stage(m, phi, T, delta, None, C1, C2, lhs, rhs2, slacks, diagnostics)


def _stage_audit(phi, model, f, T, delta, points, worst, C2, caps) -> dict:
    """Breakdown, Fourier and perturbed-frequency slacks at the worst grid point."""
    p = points[worst]
    params = UAMOParams(model.lambda1, model.lambda2, phi, p.theta)
    coeffs = uamo_variation(params, p.pert)
    proj = SiteProjection.ball(criterion_cutoff(T, f))
    dec = p.decomposition
    lhs, rhs = breakdown_check(coeffs, proj, dec.phi, dec.psi, T, caps.max_sites)
    inner = projected_mass_average(coeffs, proj, dec.psi, T, caps.max_sites)
    fourier = 2.0 * C2 * C2 / f(T) ** 0.2 - inner if math.isfinite(C2) else math.inf
    cutoff = criterion_cutoff(T, f)
    perturbed = []
    for sign in (-1.0, 1.0):
        shifted = params.with_phi(float(phi) + sign * delta / 2.0)
        perturbed.append(tail_average(uamo_variation(shifted, p.pert), T, cutoff,
                                      max_sites=caps.max_sites))
    return {"breakdown": lhs - rhs, "fourier": fourier,
            "perturbedCriterion": min(perturbed) - criterion_rhs(T, f)}


# --------------------------------------------------------------------------- #
#                           ledger verification                               #
# --------------------------------------------------------------------------- #


@dataclass
class VerificationReport:
    checks: list[tuple[str, bool, str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(passed for _, passed, _ in self.checks)

    @property
    def failures(self) -> list[tuple[str, bool, str]]:
        return [c for c in self.checks if not c[1]]

    def add(self, name: str, passed: bool, detail: str) -> None:
        self.checks.append((name, bool(passed), detail))

    def lines(self) -> list[str]:
        return [f"{'PASS' if ok else 'FAIL'} {name}: {detail}" for name, ok, detail in self.checks]


def verify_ledger(data: dict, resimulate: bool = True, tol: float = 1e-9) -> VerificationReport:
    """Re-check every recorded inequality of a ledger (as loaded from JSON)."""
    rep = VerificationReport()
    model = UAMOParams(float(data["model"]["lambda1"]), float(data["model"]["lambda2"]))
    f = GrowthFunction.from_description(data["growth"])
    caps = Caps.from_json(data["caps"])
    stages = data["stages"]
    phis = [DyadicRational.from_json(s["phi"]) for s in stages]
    deltas = [float(s["Delta"]) for s in stages]
    if not stages:
        rep.add("stages", False, "ledger has no stages")
        return rep
    rep.add("stage 1: Phi_1 = 0", phis[0] == 0, f"Phi_1 = {phis[0]}")
    T_prev, k_prev = 0, 0
    for i, s in enumerate(stages):
        m = i + 1
        T, C1, C2 = int(s["T"]), float(s["C1"]), float(s["C2"])
        rep.add(f"stage {m}: index", int(s["stage"]) == m, f"recorded {s['stage']}")
        lo = max(2, 2 * T_prev)
        ladder = T >= lo and T % lo == 0 and ((T // lo) & (T // lo - 1)) == 0
        rep.add(f"stage {m}: T on the doubling ladder from max(2, 2 T_prev)", ladder,
                f"T = {T}, T_prev = {T_prev}")
        margin = choose_t_margin(C1, C2, f(T))
        rep.add(f"stage {m}: C1^2 - 3 sqrt(2 C2^2 / f(T)^(1/5)) >= 2 / f(T)^(2/5)", margin >= 0,
                f"margin {margin:.17g}")
        rec = s["slacks"].get("chooseT")
        rep.add(f"stage {m}: recorded chooseT slack", rec is not None and abs(rec - margin) <= tol,
                f"recorded {rec}, recomputed {margin:.17g}")
        rhs2 = 2.0 * criterion_rhs(T, f)
        rep.add(f"stage {m}: criterionRhs = 2 / f(T)^(2/5)",
                abs(float(s["criterionRhs"]) - rhs2) <= tol * max(1.0, rhs2),
                f"recorded {s['criterionRhs']}, recomputed {rhs2:.17g}")
        rep.add(f"stage {m}: criterionLhs >= criterionRhs",
                float(s["criterionLhs"]) >= float(s["criterionRhs"]),
                f"{s['criterionLhs']} vs {s['criterionRhs']}")
        d_expected = choose_delta(T, model.lambda2, f)
        rep.add(f"stage {m}: Delta = min(1 / (16 pi lambda2 T^2 f(T)^(2/5)), 1/4)",
                abs(deltas[i] - d_expected) <= 1e-12 * d_expected,
                f"recorded {deltas[i]:.17g}, formula {d_expected:.17g}")
        if resimulate:
            thetas = [float(t) for t in s["thetaGrid"]]
            betas = tuple(complex(b[0], b[1]) for b in s["betaGrid"])
            vals = _criterion_values(phis[i], model, SampleGrid(tuple(thetas), betas), T, f, caps, 1)
            lhs = min(vals)
            rec_slack = s["slacks"].get("criterion")
            rep.add(f"stage {m}: re-simulated criterion matches record",
                    abs(lhs - float(s["criterionLhs"])) <= tol,
                    f"re-simulated {lhs:.17g}, recorded {s['criterionLhs']}")
            rep.add(f"stage {m}: re-simulated criterion slack",
                    rec_slack is not None and lhs - rhs2 >= 0 and abs(lhs - rhs2 - rec_slack) <= tol,
                    f"re-simulated slack {lhs - rhs2:.17g}, recorded {rec_slack}")
        k = s.get("k")
        if i + 1 < len(stages):
            if k is None:
                rep.add(f"stage {m}: k recorded", False, "k missing although a later stage exists")
                break
            k = int(k)
            rep.add(f"stage {m}: k_m > k_(m-1)", k > k_prev, f"k = {k}, previous {k_prev}")
            rep.add(f"stage {m}: k! <= cap", math.factorial(k) <= caps.factorial,
                    f"{k}! vs cap {caps.factorial}")
            inc = phis[i + 1] - phis[i]
            exact = inc == DyadicRational.power_of_two(-math.factorial(k))
            rep.add(f"stage {m}: Phi_(m+1) - Phi_m = 2^(-k_m!)", exact, f"increment {inc}")
            sl = item_iii_slacks(phis[i + 1], phis[:i + 1], deltas[:i + 1])
            bad = [j + 1 for j, x in enumerate(sl) if x <= 0]
            rep.add(f"stage {m}: |Phi_(m+1) - Phi_j| < Delta_j for j <= {m}", not bad,
                    f"min slack {float(min(sl)):.6g}" + (f", fails for j = {bad}" if bad else ""))
            k_prev = k
        T_prev = T
    total = sum((p - q for p, q in zip(phis[1:], phis[:-1])), DyadicRational(0))
    rep.add("increments sum to the last Phi", total == phis[-1] - phis[0], f"sum {total}")
    return rep
