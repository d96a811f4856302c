"""Command-line front end: run configurations, experiment orchestration,
and CSV reports.

Config format: flat ``key=value`` lines ('#' starts a comment).  Keys
mirror the command-line flags: problem, scheme, paths, steps, k, family,
seed, ridge, out, plus the problem parameters (S0, K, r, mu, sigma, T for
pricing; b0, s0, x0, T for the custom linear problem).  paths/steps/k/seed
accept comma-separated lists, which turn the run into a sweep over the
cartesian product (deterministic order: paths, steps, k, seed).

One CSV row is emitted per (sweep point, scheme).  With scheme=both, both
schemes consume the same path ensemble, so their rows differ only by the
scheme and are pairable by (seed, paths, steps, k).  The runtime_ms column
is left empty unless --timings is given, keeping default output
byte-reproducible; reference columns are empty for problems without a
closed form.

Exit codes: 0 success, 2 configuration error, 3 numerical failure.
"""

from __future__ import annotations

import argparse
import itertools
import math
import sys
from dataclasses import dataclass, replace
from typing import Optional, Sequence

import numpy as np

from .basis import BASIS_FAMILIES, make_basis
from .model import (CATALOG_DEFAULTS, PROBLEM_NAMES, ProblemCatalogEntry,
                    make_problem, make_uniform_grid)
from .oracle import reference_for
from .simulate import simulate_paths
from .solver import NumericalError, solve_regress_later, solve_regress_now

__all__ = [
    "RunConfig",
    "ReportRow",
    "ConfigError",
    "REPORT_COLUMNS",
    "parse_config_text",
    "build_config",
    "run",
    "compare_schemes",
    "write_csv",
    "main",
]


class ConfigError(ValueError):
    """Invalid run configuration; the message names the offending key."""


SCHEMES = ("later", "now", "both")

_PARAM_KEYS = {
    "call": ("S0", "K", "r", "mu", "sigma", "T"),
    "put": ("S0", "K", "r", "mu", "sigma", "T"),
    "arctan": ("T",),
    "custom": ("b0", "s0", "x0", "T"),
}
_ALL_PARAM_KEYS = tuple(dict.fromkeys(k for keys in _PARAM_KEYS.values() for k in keys))

_INT_LIST_KEYS = ("paths", "steps", "k", "seed")


@dataclass(frozen=True)
class RunConfig:
    """One validated experiment description (sweep axes kept as tuples)."""

    problem: ProblemCatalogEntry
    scheme: str = "later"
    paths: tuple[int, ...] = (10_000,)
    steps: tuple[int, ...] = (10,)
    k: tuple[int, ...] = (6,)
    family: str = "laguerre"
    seed: tuple[int, ...] = (0,)
    ridge: float = 0.0
    output_path: str = "results.csv"
    picard_iters: int = 5
    picard_tol: float = 1e-10


@dataclass(frozen=True)
class ReportRow:
    scheme: str
    problem: str
    M: int
    N: int
    k: int
    family: str
    seed: int
    y0_hat: float
    z0_hat: float
    y0_ref: Optional[float]
    z0_ref: Optional[float]
    abs_err_y: Optional[float]
    abs_err_z: Optional[float]
    log10_rel_err_y: Optional[float]
    log10_rel_err_z: Optional[float]
    max_condition: float
    runtime_ms: float
    err_basis: str


REPORT_COLUMNS = (
    "scheme", "problem", "M", "N", "k", "family", "seed",
    "y0_hat", "z0_hat", "y0_ref", "z0_ref",
    "abs_err_y", "abs_err_z", "log10_rel_err_y", "log10_rel_err_z",
    "max_condition", "runtime_ms", "err_basis",
)


def parse_config_text(text: str) -> dict[str, str]:
    """Key=value lines to an ordered mapping; blank lines and comments skipped."""
    mapping: dict[str, str] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected key=value, got {raw.strip()!r}")
        key, value = line.split("=", 1)
        mapping[key.strip()] = value.strip()
    return mapping


def _parse_int_list(key: str, value: str) -> tuple[int, ...]:
    parts = [p.strip() for p in value.split(",") if p.strip()]
    if not parts:
        raise ConfigError(f"key {key!r}: empty list")
    try:
        values = tuple(int(p) for p in parts)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected integer(s), got {value!r}") from None
    if any(v < 1 for v in values) and key != "seed":
        raise ConfigError(f"key {key!r}: values must be positive, got {value!r}")
    if key == "seed" and any(v < 0 for v in values):
        raise ConfigError(f"key {key!r}: seeds must be nonnegative, got {value!r}")
    return values


def _parse_float(key: str, value: str) -> float:
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"key {key!r}: expected a number, got {value!r}") from None


def build_config(mapping: dict[str, str]) -> RunConfig:
    """Validate a raw key/value mapping into a RunConfig.

    Keys are validated in the order they appear, so the error names the
    first invalid one.  Problem parameters omitted from the mapping take
    the shipped defaults of the named problem.
    """
    name = mapping.get("problem", "arctan")
    if name not in PROBLEM_NAMES:
        raise ConfigError(f"key 'problem': unknown problem {name!r}")

    values: dict[str, object] = {}
    for key, raw in mapping.items():
        if key == "problem":
            continue
        if key == "scheme":
            if raw not in SCHEMES:
                raise ConfigError(f"key 'scheme': must be one of {SCHEMES}, got {raw!r}")
            values[key] = raw
        elif key == "family":
            if raw not in BASIS_FAMILIES:
                raise ConfigError(
                    f"key 'family': must be one of {BASIS_FAMILIES}, got {raw!r}")
            values[key] = raw
        elif key in _INT_LIST_KEYS:
            values[key] = _parse_int_list(key, raw)
        elif key == "ridge":
            ridge = _parse_float(key, raw)
            if ridge < 0.0:
                raise ConfigError(f"key 'ridge': must be nonnegative, got {ridge}")
            values[key] = ridge
        elif key == "picard_iters":
            iters = int(_parse_float(key, raw))
            if iters < 1:
                raise ConfigError(f"key 'picard_iters': must be at least 1, got {iters}")
            values[key] = iters
        elif key == "picard_tol":
            values[key] = _parse_float(key, raw)
        elif key == "out":
            values[key] = raw
        elif key in _ALL_PARAM_KEYS:
            if key not in _PARAM_KEYS[name]:
                raise ConfigError(f"key {key!r}: not a parameter of problem {name!r}")
            values[key] = _parse_float(key, raw)
        else:
            raise ConfigError(f"unknown config key {key!r}")

    params = dict(CATALOG_DEFAULTS[name])
    params.update({k: values[k] for k in _PARAM_KEYS[name] if k in values})
    entry = ProblemCatalogEntry(name, params)
    try:
        make_problem(entry)  # surface parameter errors as config errors
    except ValueError as exc:
        raise ConfigError(str(exc)) from None

    defaults = RunConfig(problem=entry)
    return RunConfig(
        problem=entry,
        scheme=values.get("scheme", defaults.scheme),
        paths=values.get("paths", defaults.paths),
        steps=values.get("steps", defaults.steps),
        k=values.get("k", defaults.k),
        family=values.get("family", defaults.family),
        seed=values.get("seed", defaults.seed),
        ridge=values.get("ridge", defaults.ridge),
        output_path=values.get("out", defaults.output_path),
        picard_iters=values.get("picard_iters", defaults.picard_iters),
        picard_tol=values.get("picard_tol", defaults.picard_tol),
    )


def _log10_err(err: float, ref: float) -> tuple[float, str]:
    if ref != 0.0:
        rel = err / abs(ref)
        return (math.log10(rel) if rel > 0.0 else -math.inf), "relative"
    return (math.log10(err) if err > 0.0 else -math.inf), "absolute"


def run(config: RunConfig) -> list[ReportRow]:
    """Execute the run: one ensemble per sweep point (shared across schemes
    when scheme=both), one row per scheme."""
    problem = make_problem(config.problem)
    reference = reference_for(config.problem)
    schemes = ("later", "now") if config.scheme == "both" else (config.scheme,)

    rows: list[ReportRow] = []
    sweep = itertools.product(config.paths, config.steps, config.k, config.seed)
    for m_paths, n_steps, k, seed in sweep:
        grid = make_uniform_grid(problem.horizon, n_steps)
        basis = make_basis(config.family, k, problem, grid)
        ensemble = simulate_paths(problem, grid, m_paths, seed)
        for scheme in schemes:
            if scheme == "later":
                result = solve_regress_later(problem, grid, basis, ensemble,
                                             ridge=config.ridge)
            else:
                result = solve_regress_now(problem, grid, basis, ensemble,
                                           picard_iters=config.picard_iters,
                                           picard_tol=config.picard_tol,
                                           ridge=config.ridge)
            rows.append(_make_row(config, scheme, m_paths, n_steps, k, seed,
                                  result, reference))
    return rows


def _make_row(config, scheme, m_paths, n_steps, k, seed, result, reference) -> ReportRow:
    if reference is None:
        err = dict(y0_ref=None, z0_ref=None, abs_err_y=None, abs_err_z=None,
                   log10_rel_err_y=None, log10_rel_err_z=None, err_basis="")
    else:
        abs_y = abs(result.y0 - reference.y0_ref)
        abs_z = abs(result.z0 - reference.z0_ref)
        log_y, basis_y = _log10_err(abs_y, reference.y0_ref)
        log_z, basis_z = _log10_err(abs_z, reference.z0_ref)
        basis_label = basis_y if basis_y == basis_z else f"{basis_y}/{basis_z}"
        err = dict(y0_ref=reference.y0_ref, z0_ref=reference.z0_ref,
                   abs_err_y=abs_y, abs_err_z=abs_z,
                   log10_rel_err_y=log_y, log10_rel_err_z=log_z,
                   err_basis=basis_label)
    return ReportRow(
        scheme=scheme, problem=config.problem.name, M=m_paths, N=n_steps, k=k,
        family=config.family, seed=seed, y0_hat=result.y0, z0_hat=result.z0,
        max_condition=result.max_condition, runtime_ms=result.runtime_ms, **err,
    )


def compare_schemes(config: RunConfig) -> list[ReportRow]:
    """Paired-scheme run: enforces scheme=both so each sweep point yields a
    (later, now) row pair computed on one shared ensemble."""
    if config.scheme != "both":
        config = replace(config, scheme="both")
    return run(config)


def _format_value(name: str, value) -> str:
    if value is None:
        return ""
    if name in ("M", "N", "k", "seed"):
        return str(int(value))
    if isinstance(value, str):
        return value
    return f"{value:.17g}"


def rows_to_csv(rows: Sequence[ReportRow], include_timings: bool = False) -> str:
    lines = [",".join(REPORT_COLUMNS)]
    for row in rows:
        values = []
        for name in REPORT_COLUMNS:
            if name == "runtime_ms" and not include_timings:
                values.append("")
                continue
            values.append(_format_value(name, getattr(row, name)))
        lines.append(",".join(values))
    return "\n".join(lines) + "\n"


def write_csv(rows: Sequence[ReportRow], path: str, include_timings: bool = False) -> None:
    text = rows_to_csv(rows, include_timings=include_timings)
    with open(path, "w", encoding="utf-8", newline="") as handle:
        handle.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="fbsde",
        description="Solve decoupled FBSDEs by least-squares Monte Carlo regression.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    solve = sub.add_parser("solve", help="run the configured experiment")
    solve.add_argument("--config", help="path to a key=value config file")
    solve.add_argument("--problem", dest="problem")
    solve.add_argument("--scheme", dest="scheme")
    solve.add_argument("--paths", dest="paths")
    solve.add_argument("--steps", dest="steps")
    solve.add_argument("--k", dest="k")
    solve.add_argument("--family", dest="family")
    solve.add_argument("--seed", dest="seed")
    solve.add_argument("--ridge", dest="ridge")
    solve.add_argument("--out", dest="out")
    solve.add_argument("--timings", action="store_true",
                       help="write measured runtimes (output no longer byte-reproducible)")
    solve.add_argument("overrides", nargs="*", metavar="KEY=VALUE",
                       help="additional config overrides")

    args = parser.parse_args(argv)
    try:
        mapping: dict[str, str] = {}
        if args.config:
            try:
                with open(args.config, "r", encoding="utf-8") as handle:
                    mapping.update(parse_config_text(handle.read()))
            except OSError as exc:
                print(f"error: cannot read config {args.config!r}: {exc}", file=sys.stderr)
                return 2
        for item in args.overrides:
            if "=" not in item:
                raise ConfigError(f"override {item!r}: expected KEY=VALUE")
            key, value = item.split("=", 1)
            mapping[key.strip()] = value.strip()
        for key in ("problem", "scheme", "paths", "steps", "k", "family",
                    "seed", "ridge", "out"):
            value = getattr(args, key)
            if value is not None:
                mapping[key] = value
        config = build_config(mapping)
        rows = run(config)
        write_csv(rows, config.output_path, include_timings=args.timings)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 3
    except OSError as exc:
        print(f"error: cannot write output: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
