"""Command-line front end: ``ecmv <command> [--config FILE] [key=value ...]``.

Configuration is plain ``key=value`` text.  Values given on the command line
override the config file, which overrides the defaults.  Every output starts
with ``#`` header lines holding the version and the fully resolved config
(JSON outputs carry the same data under ``"config"``).

Exit codes: 0 success, 1 verification failure, 2 configuration error,
3 budget or cap exceeded.
"""

from __future__ import annotations

import argparse
import io
import json
import math
import os
import sys
from fractions import Fraction
from pathlib import Path

import numpy as np

from . import __version__
from .core import (
    WavePacket,
    WindowOverflowError,
    centered_window,
    load_coefficients_csv,
    truncate,
)
from .dynamics import (
    GrowthFunction,
    MemoryBudgetError,
    criterion_cutoff,
    criterion_lhs,
    criterion_rhs,
    evolve,
)
from .floquet import (
    ContinuationJumpError,
    MissingPeriodError,
    RootCountMismatch,
    discriminant,
    floquet_curves,
)
from .models import (
    PerturbationParams,
    UAMOParams,
    constant_coeffs,
    free_coeffs,
    random_coeffs,
    uamo_variation,
)
from .quasiballistic import (
    Caps,
    CapExceededError,
    SampleGrid,
    construct_phi,
    duhamel_bound,
    duhamel_measured,
    verify_ledger,
)
from .spectral import InsufficientTailError, decay_fit, diagonalize

COMMANDS = ("simulate", "discriminant", "floquet", "spectrum", "criterion", "duhamel",
            "construct-phi", "verify-ledger")

OUTPUT_DIR_ENV = "ECMV_OUTPUT_DIR"

DEFAULTS: dict[str, str] = {
    # model
    "model": "uamo",
    "lambda1": "0.4",
    "lambda2": "0.95",
    "phi": "0",
    "theta": "0.1",
    "beta0": "",
    "beta1": "",
    "alpha": "0",
    "seed": "0",
    "radius": "0.9",
    "coeff_file": "",
    "coeff_period": "0",
    # growth function
    "f_kind": "log",
    "f_param": "10",
    # simulate
    "tmax": "100",
    "stride": "1",
    "cutoff_rule": "none",
    "cutoff": "0",
    "max_sites": "10000000",
    # discriminant / floquet
    "points": "256",
    "k_points": "200",
    # spectrum
    "N": "500",
    "eta": "1",
    # criterion
    "T": "64",
    # duhamel
    "dphi": "1/1024",
    # construct-phi
    "max_stages": "2",
    "T_cap": "65536",
    "truncation_cap": "4096",
    "factorial_cap": "12",
    "n_theta": "16",
    "betas": "0,0.5,-0.5,0.5j,-0.5j",
    "drift_check": "1",
    # verify-ledger
    "ledger": "",
    "resimulate": "1",
}


class ConfigError(ValueError):
    pass


# --------------------------------------------------------------------------- #
#                             configuration                                   #
# --------------------------------------------------------------------------- #


def parse_assignments(items, source: str) -> dict[str, str]:
    out = {}
    for raw in items:
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: expected key=value, got {line!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in DEFAULTS:
            raise ConfigError(f"unknown config key {key!r}")
        out[key] = value
    return out


def resolve_config(config_file: str | None, overrides) -> dict[str, str]:
    cfg = dict(DEFAULTS)
    if config_file:
        try:
            text = Path(config_file).read_text()
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from exc
        cfg.update(parse_assignments(text.splitlines(), config_file))
    cfg.update(parse_assignments(overrides, "command line"))
    return cfg


class Config:
    """Typed access to the resolved string config; conversion errors are config errors."""

    def __init__(self, values: dict[str, str]):
        self.values = values

    def _conv(self, key, fn):
        try:
            return fn(self.values[key])
        except (ValueError, ZeroDivisionError) as exc:
            raise ConfigError(f"bad value for {key!r}: {self.values[key]!r} ({exc})") from exc

    def str(self, key) -> str:
        return self.values[key]

    def float(self, key) -> float:
        return self._conv(key, float)

    def int(self, key) -> int:
        return self._conv(key, int)

    def complex(self, key) -> complex:
        return self._conv(key, lambda s: complex(s.replace(" ", "")))

    def optional_complex(self, key) -> complex | None:
        return None if self.values[key] == "" else self.complex(key)

    def frequency(self, key):
        def parse(s):
            if "/" in s or s.lstrip("+-").isdigit():
                return Fraction(s)
            return float(s)
        return self._conv(key, parse)


def build_coeffs(cfg: Config):
    kind = cfg.str("model")
    if kind == "uamo":
        params = UAMOParams(cfg.float("lambda1"), cfg.float("lambda2"), cfg.frequency("phi"),
                            cfg.float("theta"))
        b0, b1 = cfg.optional_complex("beta0"), cfg.optional_complex("beta1")
        pert = None if b0 is None and b1 is None else PerturbationParams(b0 or 0j, b1 or 0j)
        return uamo_variation(params, pert)
    if kind == "free":
        return free_coeffs()
    if kind == "constant":
        return constant_coeffs(cfg.complex("alpha"))
    if kind == "random":
        return random_coeffs(cfg.int("seed"), cfg.float("radius"))
    if kind == "file":
        path = cfg.str("coeff_file")
        if not path:
            raise ConfigError("model=file needs coeff_file")
        period = cfg.int("coeff_period") or None
        return load_coefficients_csv(path, period)
    raise ConfigError(f"unknown model {kind!r}")


def growth_from(cfg: Config) -> GrowthFunction:
    return GrowthFunction(cfg.str("f_kind"), cfg.float("f_param"))


# --------------------------------------------------------------------------- #
#                                output                                       #
# --------------------------------------------------------------------------- #


def fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return format(float(x), ".17g")


def header_lines(command: str, cfg: dict[str, str]) -> list[str]:
    lines = [f"# ecmv {__version__}", f"# command={command}"]
    lines += [f"# {k}={cfg[k]}" for k in sorted(cfg)]
    return lines


def write_csv(buf: io.StringIO, columns, rows) -> None:
    buf.write(",".join(columns) + "\n")
    for row in rows:
        buf.write(",".join(fmt(v) for v in row) + "\n")


def output_path(command: str, out: str | None, ext: str) -> Path | None:
    if out:
        return Path(out)
    base = os.environ.get(OUTPUT_DIR_ENV)
    if base:
        return Path(base) / f"{command}.{ext}"
    return None


def emit(text: str, path: Path | None) -> None:
    if path is None:
        sys.stdout.write(text)
        return
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="\n", encoding="utf-8") as fh:
        fh.write(text)


# --------------------------------------------------------------------------- #
#                               commands                                      #
# --------------------------------------------------------------------------- #


def cmd_simulate(cfg: Config, buf: io.StringIO, args) -> int:
    coeffs = build_coeffs(cfg)
    rule = cfg.str("cutoff_rule")
    if rule == "none":
        cutoff = None
    elif rule == "fixed":
        cutoff = cfg.float("cutoff")
    elif rule == "criterion":
        f = growth_from(cfg)
        cutoff = lambda t: criterion_cutoff(max(t, 1), f)
    else:
        raise ConfigError(f"unknown cutoff_rule {rule!r}")
    series = evolve(coeffs, WavePacket.delta(0), cfg.int("tmax"), stride=cfg.int("stride"),
                    cutoff=cutoff, max_sites=cfg.int("max_sites"))
    tails = series.tail_mass if series.tail_mass is not None else [None] * len(series.times)
    rows = zip(series.times, series.second_moment, series.ballistic_ratio, tails)
    write_csv(buf, ["t", "second_moment", "ratio", "tail_mass"], rows)
    return 0


def cmd_discriminant(cfg: Config, buf: io.StringIO, args) -> int:
    coeffs = build_coeffs(cfg)
    n = cfg.int("points")
    thetas = 2.0 * np.pi * np.arange(n) / n
    d, dd = discriminant(coeffs, np.exp(1j * thetas), with_derivative=True)
    rows = zip(thetas, d.real, d.imag, dd.real, dd.imag)
    write_csv(buf, ["theta", "re_delta", "im_delta", "re_ddelta", "im_ddelta"], rows)
    return 0


def cmd_floquet(cfg: Config, buf: io.StringIO, args) -> int:
    coeffs = build_coeffs(cfg)
    ks = np.linspace(0.0, np.pi, cfg.int("k_points"))
    rows = []
    for band in floquet_curves(coeffs, ks):
        z = band.z
        for k, zz, ph, d, r in zip(band.k, z, band.phase, band.delta, band.residual()):
            rows.append((band.band_index, k, zz.real, zz.imag, ph, d, r))
    write_csv(buf, ["band", "k", "re_z", "im_z", "phase", "delta", "residual"], rows)
    return 0


def cmd_spectrum(cfg: Config, buf: io.StringIO, args) -> int:
    coeffs = build_coeffs(cfg)
    n = cfg.int("N")
    if n < 2 or n % 2:
        raise ConfigError(f"N must be an even integer >= 2 to align with the 2x2 blocks, got {n}")
    es = diagonalize(truncate(coeffs, centered_window(n), cfg.complex("eta")))
    rows = []
    for j in range(es.size):
        try:
            fit = decay_fit(es.vectors[:, j], es.sites)
            rate, r2 = fit.rate, fit.r_squared
        except InsufficientTailError:
            rate = r2 = math.nan
        z = es.eigenvalues[j]
        rows.append((j, z.real, z.imag, rate, r2))
    write_csv(buf, ["j", "re_z", "im_z", "decay_rate", "r_squared"], rows)
    return 0


def cmd_criterion(cfg: Config, buf: io.StringIO, args) -> int:
    coeffs = build_coeffs(cfg)
    f = growth_from(cfg)
    T = cfg.int("T")
    lhs = criterion_lhs(coeffs, T, f, cfg.int("max_sites"))
    rhs = criterion_rhs(T, f)
    write_csv(buf, ["T", "cutoff", "lhs", "rhs", "twice_rhs"],
              [(T, criterion_cutoff(T, f), lhs, rhs, 2 * rhs)])
    return 0


def cmd_duhamel(cfg: Config, buf: io.StringIO, args) -> int:
    if cfg.str("model") != "uamo":
        raise ConfigError("duhamel compares two UAMO frequencies; set model=uamo")
    phi1, dphi = cfg.frequency("phi"), cfg.frequency("dphi")
    phi2 = phi1 + dphi
    p1 = UAMOParams(cfg.float("lambda1"), cfg.float("lambda2"), phi1, cfg.float("theta"))
    b0, b1 = cfg.optional_complex("beta0"), cfg.optional_complex("beta1")
    pert = None if b0 is None and b1 is None else PerturbationParams(b0 or 0j, b1 or 0j)
    measured = duhamel_measured(p1, p1.with_phi(phi2), pert, cfg.int("tmax"), cfg.int("max_sites"))
    rows = [(t, m, duhamel_bound(phi1, phi2, p1.lambda2, t)) for t, m in enumerate(measured)]
    write_csv(buf, ["t", "measured", "bound"], rows)
    return 0


def _betas(cfg: Config) -> tuple[complex, ...]:
    try:
        return tuple(complex(s.strip()) for s in cfg.str("betas").split(",") if s.strip())
    except ValueError as exc:
        raise ConfigError(f"bad value for 'betas': {exc}") from exc


def cmd_construct_phi(cfg: Config, buf: io.StringIO, args) -> int:
    model = UAMOParams(cfg.float("lambda1"), cfg.float("lambda2"))
    caps = Caps(cfg.int("T_cap"), cfg.int("truncation_cap"), cfg.int("factorial_cap"),
                cfg.int("max_sites"))
    grid = SampleGrid.uniform(cfg.int("n_theta"), _betas(cfg))
    ledger = construct_phi(model, growth_from(cfg), cfg.int("max_stages"), caps, grid,
                           workers=args.threads, check_drift=bool(cfg.int("drift_check")))
    data = ledger.to_json()
    data["config"] = dict(sorted(cfg.values.items()))
    buf.write(json.dumps(data, indent=2, sort_keys=True) + "\n")
    if ledger.status == "cap-exceeded":
        sys.stderr.write(f"cap exceeded at stage {ledger.failure['stage']}: "
                         f"{ledger.failure['inequality']}: {ledger.failure['detail']}\n")
        return 3
    if ledger.status != "complete":
        sys.stderr.write(f"{ledger.status}: {ledger.failure['detail']}\n")
        return 1
    return 0


def cmd_verify_ledger(cfg: Config, buf: io.StringIO, args) -> int:
    path = cfg.str("ledger")
    if not path:
        raise ConfigError("verify-ledger needs ledger=<path>")
    try:
        data = json.loads(Path(path).read_text())
    except (OSError, ValueError) as exc:
        raise ConfigError(f"cannot read ledger: {exc}") from exc
    report = verify_ledger(data, resimulate=bool(cfg.int("resimulate")))
    for line in report.lines():
        buf.write(line + "\n")
    buf.write(("VERIFIED" if report.ok else "FAILED") + "\n")
    return 0 if report.ok else 1


HANDLERS = {
    "simulate": (cmd_simulate, "csv"),
    "discriminant": (cmd_discriminant, "csv"),
    "floquet": (cmd_floquet, "csv"),
    "spectrum": (cmd_spectrum, "csv"),
    "criterion": (cmd_criterion, "csv"),
    "duhamel": (cmd_duhamel, "csv"),
    "construct-phi": (cmd_construct_phi, "json"),
    "verify-ledger": (cmd_verify_ledger, "txt"),
}


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecmv", description=__doc__.splitlines()[0])
    p.add_argument("command", choices=COMMANDS)
    p.add_argument("assignments", nargs="*", metavar="key=value")
    p.add_argument("--config", help="key=value config file")
    p.add_argument("--out", help=f"output file (default: ${OUTPUT_DIR_ENV}/<command>.<ext> or stdout)")
    p.add_argument("--threads", type=int, default=1, help="worker threads for grid evaluations")
    p.add_argument("--version", action="version", version=f"ecmv {__version__}")
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_intermixed_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    handler, ext = HANDLERS[args.command]
    try:
        values = resolve_config(args.config, args.assignments)
        cfg = Config(values)
        body = io.StringIO()
        code = handler(cfg, body, args)
    except ConfigError as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (MissingPeriodError, ValueError) as exc:
        sys.stderr.write(f"config error: {exc}\n")
        return 2
    except (MemoryBudgetError, CapExceededError, WindowOverflowError) as exc:
        sys.stderr.write(f"budget exceeded: {exc}\n")
        return 3
    except (RootCountMismatch, ContinuationJumpError) as exc:
        sys.stderr.write(f"numerical failure: {exc}\n")
        return 1
    buf = io.StringIO()
    if ext == "json":
        buf.write(body.getvalue())
    else:
        buf.write("\n".join(header_lines(args.command, values)) + "\n")
        buf.write(body.getvalue())
    emit(buf.getvalue(), output_path(args.command, args.out, ext))
    return code


if __name__ == "__main__":
    raise SystemExit(main())
