"""Experiment harness: config files, matrix I/O, run orchestration, CLI.

Configs are flat ``key = value`` text files; command-line overrides of the
form ``key=value`` win over the file. Run logs, a summary report and a
config echo land in the output directory, so a run is reproducible from
its artifacts alone. Verbosity comes from the ``CPGD_LOG`` environment
variable (error | info | debug).

CLI subcommands: ``solve <config>``, ``gen-data <spec>``,
``rates <runlog.csv>``, ``check <config>``. Exit codes: 0 success,
2 config error, 3 solver failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import logging
import math
import os
import struct
import sys
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import onmf as onmf_mod
from .rates import fit_kl_exponent, rate_report_text
from .solver import (RunLog, SeparableQuadratic, SolverConfig, run_cpgd,
                     run_pgd_baseline)

logger = logging.getLogger(__name__)

__all__ = [
    "ConfigError",
    "MatrixFormatError",
    "ExperimentConfig",
    "load_matrix",
    "save_matrix",
    "parse_config_file",
    "build_experiment_config",
    "run_experiment",
    "gen_data",
    "main",
]

MATRIX_MAGIC = b"CPGDMAT1"


class ConfigError(Exception):
    """Invalid or inconsistent experiment configuration."""


class MatrixFormatError(ValueError):
    """Malformed matrix file content."""


# ---------------------------------------------------------------------------
# matrix I/O


def save_matrix(path, matrix) -> None:
    """Write a dense matrix; format chosen by extension (.csv or .bin).

    Binary layout: 8-byte magic, two little-endian uint64 dims, then the
    row-major little-endian float64 payload. CSV rows carry 17 significant
    digits, enough to round-trip float64 exactly.
    """
    M = np.ascontiguousarray(np.atleast_2d(np.asarray(matrix, dtype=float)))
    if M.ndim != 2:
        raise MatrixFormatError(f"matrix must be 2-D, got shape {M.shape}")
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError("refusing to write non-finite entries")
    path = Path(path)
    if path.suffix == ".csv":
        with open(path, "w", newline="") as fh:
            for row in M:
                fh.write(",".join(f"{v:.17g}" for v in row) + "\n")
    elif path.suffix == ".bin":
        with open(path, "wb") as fh:
            fh.write(MATRIX_MAGIC)
            fh.write(struct.pack("<QQ", M.shape[0], M.shape[1]))
            fh.write(M.astype("<f8").tobytes(order="C"))
    else:
        raise MatrixFormatError(
            f"unknown matrix extension {path.suffix!r} (use .csv or .bin)")


def load_matrix(path) -> np.ndarray:
    """Read a dense matrix written by :func:`save_matrix`."""
    path = Path(path)
    if path.suffix == ".csv":
        return _load_csv(path)
    if path.suffix == ".bin":
        return _load_binary(path)
    raise MatrixFormatError(
        f"unknown matrix extension {path.suffix!r} (use .csv or .bin)")


def _load_csv(path) -> np.ndarray:
    rows = []
    ncols = None
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if ncols is None:
                ncols = len(parts)
            elif len(parts) != ncols:
                raise MatrixFormatError(
                    f"{path}, line {lineno}: expected {ncols} columns, "
                    f"got {len(parts)}")
            try:
                rows.append([float(v) for v in parts])
            except ValueError as exc:
                raise MatrixFormatError(
                    f"{path}, line {lineno}: {exc}") from exc
    if not rows:
        raise MatrixFormatError(f"{path}: no matrix rows found")
    M = np.array(rows, dtype=float)
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError(f"{path}: non-finite entries")
    return M


def _load_binary(path) -> np.ndarray:
    with open(path, "rb") as fh:
        magic = fh.read(len(MATRIX_MAGIC))
        if magic != MATRIX_MAGIC:
            raise MatrixFormatError(
                f"{path}: bad magic {magic!r}, expected {MATRIX_MAGIC!r}")
        header = fh.read(16)
        if len(header) != 16:
            raise MatrixFormatError(f"{path}: truncated dimension header")
        rows, cols = struct.unpack("<QQ", header)
        payload = fh.read()
    expected = rows * cols * 8
    if len(payload) != expected:
        raise MatrixFormatError(
            f"{path}: payload is {len(payload)} bytes, expected {expected} "
            f"for {rows}x{cols}")
    M = np.frombuffer(payload, dtype="<f8").astype(float).reshape(rows, cols)
    if not np.all(np.isfinite(M)):
        raise MatrixFormatError(f"{path}: non-finite entries")
    return M


# ---------------------------------------------------------------------------
# configuration


def parse_config_file(path) -> dict:
    """Flat key = value file -> string dict. '#' starts a comment line."""
    out = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            if "=" not in line:
                raise ConfigError(f"{path}, line {lineno}: expected key=value, "
                                  f"got {line!r}")
            key, _, value = line.partition("=")
            out[key.strip()] = value.strip()
    return out


def apply_overrides(settings: dict, overrides) -> dict:
    merged = dict(settings)
    for item in overrides or ():
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not of the form key=value")
        key, _, value = item.partition("=")
        merged[key.strip()] = value.strip()
    return merged


def _as_bool(key, value):
    low = str(value).lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _as_float(key, value):
    try:
        return float(value)
    except ValueError:
        raise ConfigError(f"{key}: expected a number, got {value!r}") from None


def _as_int(key, value):
    try:
        return int(value)
    except ValueError:
        raise ConfigError(f"{key}: expected an integer, got {value!r}") from None


_KNOWN_KEYS = {
    "problem", "solver", "out_dir", "seed", "eta_multiplier", "max_cycles",
    "time_budget", "step_tol", "root_tol", "assert_descent", "rates_fit",
    "onmf.data", "onmf.rank", "onmf.lambda", "onmf.m", "onmf.n",
    "onmf.noise", "onmf.data_seed",
    "quad.n", "quad.target", "quad.weights", "quad.lower", "quad.upper",
    "quad.blocks",
}

_SOLVER_CHOICES = ("cpgd", "pgd-baseline", "both")


@dataclass
class ExperimentConfig:
    """Validated experiment description."""

    problem: str
    solver_choice: str
    out_dir: Path
    solver: SolverConfig
    rates_fit: bool
    settings: dict = field(default_factory=dict)


def build_experiment_config(settings: dict, base_dir=".") -> ExperimentConfig:
    """Validate raw settings into an :class:`ExperimentConfig`."""
    unknown = set(settings) - _KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    problem = settings.get("problem")
    if problem not in ("onmf", "quadratic"):
        raise ConfigError(
            f"problem must be 'onmf' or 'quadratic', got {problem!r}")
    solver_choice = settings.get("solver", "cpgd")
    if solver_choice not in _SOLVER_CHOICES:
        raise ConfigError(
            f"solver must be one of {_SOLVER_CHOICES}, got {solver_choice!r}")

    base_dir = Path(base_dir)
    try:
        solver = SolverConfig(
            eta_multiplier=_as_float("eta_multiplier",
                                     settings.get("eta_multiplier", "0.51")),
            max_cycles=_as_int("max_cycles", settings.get("max_cycles", "1000")),
            time_budget=(_as_float("time_budget", settings["time_budget"])
                         if "time_budget" in settings else None),
            step_tol=(_as_float("step_tol", settings["step_tol"])
                      if "step_tol" in settings else None),
            root_tol=_as_float("root_tol", settings.get("root_tol", "1e-12")),
            assert_descent=_as_bool("assert_descent",
                                    settings.get("assert_descent", "true")),
            seed=_as_int("seed", settings.get("seed", "0")),
        )
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc

    if problem == "onmf":
        if "onmf.data" in settings:
            data = base_dir / settings["onmf.data"]
            if not data.is_file():
                raise ConfigError(f"onmf.data file not found: {data}")
        else:
            for key in ("onmf.m", "onmf.n"):
                if key not in settings:
                    raise ConfigError(
                        f"onmf without onmf.data needs synthetic dims; "
                        f"missing {key}")
                if _as_int(key, settings[key]) < 1:
                    raise ConfigError(f"{key} must be positive")
        rank = _as_int("onmf.rank", settings.get("onmf.rank", "15"))
        if rank < 1:
            raise ConfigError("onmf.rank must be >= 1")
        lam = _as_float("onmf.lambda", settings.get("onmf.lambda", "1000"))
        if lam <= 0:
            raise ConfigError("onmf.lambda must be positive")
        if _as_float("onmf.noise", settings.get("onmf.noise", "0")) < 0:
            raise ConfigError("onmf.noise must be >= 0")
    else:
        if "quad.target" in settings:
            _parse_vector("quad.target", settings["quad.target"])
        elif _as_int("quad.n", settings.get("quad.n", "2")) < 1:
            raise ConfigError("quad.n must be >= 1")

    return ExperimentConfig(
        problem=problem,
        solver_choice=solver_choice,
        out_dir=base_dir / settings.get("out_dir", "runs"),
        solver=solver,
        rates_fit=_as_bool("rates_fit", settings.get("rates_fit", "false")),
        settings=dict(settings),
    )


def _parse_vector(key, value) -> np.ndarray:
    try:
        return np.array([float(v) for v in str(value).split(",") if v.strip()])
    except ValueError:
        raise ConfigError(f"{key}: expected comma-separated numbers, "
                          f"got {value!r}") from None


# ---------------------------------------------------------------------------
# experiment assembly and execution


def _build_problem(cfg: ExperimentConfig, base_dir: Path):
    s = cfg.settings
    if cfg.problem == "onmf":
        rank = int(s.get("onmf.rank", 15))
        lam = float(s.get("onmf.lambda", 1000))
        if "onmf.data" in s:
            X = load_matrix(base_dir / s["onmf.data"])
            inst = onmf_mod.OnmfInstance(X, rank, lam)
        else:
            data_seed = int(s.get("onmf.data_seed", cfg.solver.seed))
            inst, _ = onmf_mod.synthetic_instance(
                int(s["onmf.m"]), int(s["onmf.n"]), rank,
                float(s.get("onmf.noise", 0.0)), data_seed, lam=lam)
        problem = onmf_mod.OnmfProblem(inst)
        x0 = problem.pack(onmf_mod.random_state(inst, cfg.solver.seed))
        return problem, x0

    if "quad.target" in s:
        b = _parse_vector("quad.target", s["quad.target"])
    else:
        n = int(s.get("quad.n", 2))
        b = np.random.default_rng(cfg.solver.seed).standard_normal(n) * 2.0
    weights = (_parse_vector("quad.weights", s["quad.weights"])
               if "quad.weights" in s else None)
    lower = float(s.get("quad.lower", 0.0))
    upper = float(s.get("quad.upper", math.inf))
    blocks = ([int(v) for v in s["quad.blocks"].split(",")]
              if "quad.blocks" in s else None)
    problem = SeparableQuadratic(b, weights=weights, lower=lower, upper=upper,
                                 block_sizes=blocks)
    rng = np.random.default_rng(cfg.solver.seed)
    x0 = np.clip(rng.standard_normal(b.size), problem.lower, problem.upper)
    return problem, x0


_RUNNERS = {"cpgd": run_cpgd, "pgd-baseline": run_pgd_baseline}
_LOG_FILES = {"cpgd": "runlog_cpgd.csv", "pgd-baseline": "runlog_pgd.csv"}


def run_experiment(cfg: ExperimentConfig, base_dir=".") -> dict:
    """Run the configured solver(s); write logs, summary and config echo.

    Returns a summary dict keyed by solver name. Identical (config, seed)
    pairs produce identical logs except for the elapsed_s column.
    """
    base_dir = Path(base_dir)
    problem, x0 = _build_problem(cfg, base_dir)
    out_dir = cfg.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)

    selected = (["cpgd", "pgd-baseline"] if cfg.solver_choice == "both"
                else [cfg.solver_choice])
    summary = {}
    report_lines = []
    for name in selected:
        logger.info("running %s on %s", name, cfg.problem)
        log = _RUNNERS[name](problem, x0, cfg.solver)
        log_path = out_dir / _LOG_FILES[name]
        log.to_csv(log_path)
        last = log.final
        entry = {
            "status": log.status,
            "cycles": last.cycle,
            "final_F": last.F,
            "final_step_norm": last.step_norm,
            "elapsed_s": last.elapsed_s,
            "log_path": str(log_path),
        }
        for key in log.metric_keys:
            entry[f"final_{key}"] = last.metrics.get(key, math.nan)
        report_lines.append(f"[{name}]")
        report_lines += [f"{k}: {_fmt(v)}" for k, v in entry.items()]
        if log.status_detail:
            report_lines.append(f"detail: {log.status_detail}")
        if cfg.rates_fit:
            if len(log) >= 20:
                fit = fit_kl_exponent(log)
                entry["rate_fit"] = fit
                report_lines.append("rate fit:")
                report_lines += ["  " + ln
                                 for ln in rate_report_text(fit).splitlines()]
            else:
                report_lines.append("rate fit: skipped (fewer than 20 cycles)")
        report_lines.append("")
        summary[name] = entry
        logger.info("%s finished: %s after %d cycles, F=%.6g",
                    name, log.status, last.cycle, last.F)

    (out_dir / "summary.txt").write_text("\n".join(report_lines))
    echo = "\n".join(f"{k} = {cfg.settings[k]}" for k in sorted(cfg.settings))
    (out_dir / "config_echo.txt").write_text(echo + "\n")
    return summary


def _fmt(v):
    if isinstance(v, float):
        return f"{v:.17g}"
    return str(v)


# ---------------------------------------------------------------------------
# data generation

_GEN_KEYS = {"m", "n", "r", "noise", "seed", "lambda", "out", "format",
             "save_factors"}


def gen_data(settings: dict, base_dir=".") -> list:
    """Generate a synthetic instance and write its matrix file(s).

    Settings: m, n, r (dims), noise, seed, out (stem for output files),
    format (csv | bin), save_factors (also write the planted factors).
    Returns the list of written paths.
    """
    unknown = set(settings) - _GEN_KEYS
    if unknown:
        raise ConfigError(f"unknown data-spec keys: {sorted(unknown)}")
    for key in ("m", "n", "r"):
        if key not in settings:
            raise ConfigError(f"data spec needs {key}")
    m = _as_int("m", settings["m"])
    n = _as_int("n", settings["n"])
    r = _as_int("r", settings["r"])
    if min(m, n, r) < 1:
        raise ConfigError("dimensions must be positive")
    noise = _as_float("noise", settings.get("noise", "0"))
    seed = _as_int("seed", settings.get("seed", "0"))
    lam = _as_float("lambda", settings.get("lambda", "1000"))
    fmt = settings.get("format", "bin")
    if fmt not in ("csv", "bin"):
        raise ConfigError(f"format must be csv or bin, got {fmt!r}")
    stem = Path(base_dir) / settings.get("out", "onmf_data")
    stem.parent.mkdir(parents=True, exist_ok=True)

    try:
        inst, planted = onmf_mod.synthetic_instance(m, n, r, noise, seed, lam=lam)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc
    written = []
    x_path = stem.with_name(stem.name + f"_X.{fmt}")
    save_matrix(x_path, inst.X)
    written.append(x_path)
    if _as_bool("save_factors", settings.get("save_factors", "false")):
        for tag, M in (("W", planted.W), ("V", planted.V)):
            p = stem.with_name(stem.name + f"_{tag}.{fmt}")
            save_matrix(p, M)
            written.append(p)
    return written


# ---------------------------------------------------------------------------
# CLI

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_IO = 4


def _setup_logging():
    level = {"error": logging.ERROR, "info": logging.INFO,
             "debug": logging.DEBUG}.get(
        os.environ.get("CPGD_LOG", "info").lower(), logging.INFO)
    logging.basicConfig(level=level,
                        format="%(levelname)s %(name)s: %(message)s")


def _build_parser():
    parser = argparse.ArgumentParser(
        prog="cpgd",
        description="Block coordinate projected gradient experiments")
    sub = parser.add_subparsers(dest="command", required=True)

    p_solve = sub.add_parser("solve", help="run an experiment config")
    p_solve.add_argument("config")
    p_solve.add_argument("overrides", nargs="*", metavar="key=value")

    p_check = sub.add_parser("check", help="validate a config and exit")
    p_check.add_argument("config")
    p_check.add_argument("overrides", nargs="*", metavar="key=value")

    p_gen = sub.add_parser("gen-data", help="generate synthetic matrices")
    p_gen.add_argument("spec")
    p_gen.add_argument("overrides", nargs="*", metavar="key=value")

    p_rates = sub.add_parser("rates", help="fit a KL rate to a run log")
    p_rates.add_argument("runlog")
    p_rates.add_argument("--tail-fraction", type=float, default=0.5)
    p_rates.add_argument("--csv", default=None,
                         help="also write per-cycle gap/bound columns here")
    return parser


def main(argv=None) -> int:
    _setup_logging()
    args = _build_parser().parse_args(argv)
    try:
        if args.command in ("solve", "check"):
            settings = apply_overrides(parse_config_file(args.config),
                                       args.overrides)
            base = Path(args.config).resolve().parent
            cfg = build_experiment_config(settings, base_dir=base)
            if args.command == "check":
                print("config ok")
                return EXIT_OK
            summary = run_experiment(cfg, base_dir=base)
            for name, entry in summary.items():
                print(f"{name}: {entry['status']} after {entry['cycles']} "
                      f"cycles, F={entry['final_F']:.12g} "
                      f"({entry['log_path']})")
            return EXIT_OK
        if args.command == "gen-data":
            settings = apply_overrides(parse_config_file(args.spec),
                                       args.overrides)
            base = Path(args.spec).resolve().parent
            for path in gen_data(settings, base_dir=base):
                print(path)
            return EXIT_OK
        if args.command == "rates":
            log = RunLog.from_csv(args.runlog)
            fit = fit_kl_exponent(log, tail_fraction=args.tail_fraction)
            sys.stdout.write(rate_report_text(fit))
            if args.csv:
                _write_rate_csv(args.csv, log, fit)
            return EXIT_OK
        raise AssertionError(f"unhandled command {args.command}")
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except (MatrixFormatError, OSError) as exc:
        logger.error("i/o error: %s", exc)
        return EXIT_IO
    except (RuntimeError, ValueError) as exc:
        logger.error("solver failure: %s", exc)
        return EXIT_SOLVER


def _write_rate_csv(path, log: RunLog, fit) -> None:
    """Per-cycle observed gap vs fitted KL right-hand side."""
    gaps = log.F_values - fit.f_star
    S = log.stat_bounds
    with open(path, "w", newline="") as fh:
        fh.write("cycle,gap,stat_bound,kl_rhs\n")
        for rec, gap, s in zip(log.records, gaps, S):
            if math.isnan(fit.q) or s <= 0:
                rhs = math.nan
            else:
                rhs = fit.sigma_q * s ** fit.q
            fh.write(f"{rec.cycle},{gap:.17g},{s:.17g},{rhs:.17g}\n")


if __name__ == "__main__":
    sys.exit(main())
