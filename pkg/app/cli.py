#!/usr/bin/env python3
"""
Batch front-end: run catalog problems, print Newton tables and write CSVs

    python -m app.cli list
    python -m app.cli run example1-sinpi --n 10,100
    python -m app.cli run manufactured --study 10,20,40,80 --csv study.csv
"""
import argparse
import logging
import sys
from pathlib import Path
from typing import Dict, List, Optional, TextIO

import numpy as np
import pandas as pd
from pydantic import BaseModel, ConfigDict, ValidationError, field_validator, model_validator

from app.analysis import BoundInputs, convergence_study, error_bound_terms
from app.assembly import assemble, dump_system
from app.catalog import CATALOG, CatalogEntry, get_entry, problem_ids
from app.config import settings
from app.exceptions import ConfigurationError, FredholmError
from app.grid import UniformGrid, cell_means
from app.logging_utils import setup_run_logger
from app.solver import GuessPolicy, NewtonConfig, NewtonReport, newton_solve

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FAILURE = 1
EXIT_NOT_CONVERGED = 2
EXIT_USAGE = 64

ITERATION_COLUMNS = ["n", "k", "relative_error", "residual_norm"]
GUESS_CHOICES = {"zeros": GuessPolicy.ZEROS, "ymeans": GuessPolicy.YMEANS,
                 "reference": GuessPolicy.REFERENCE, "file": GuessPolicy.USER}


def _int_list(value) -> List[int]:
    if isinstance(value, int):
        return [value]
    if isinstance(value, str):
        return [int(v) for v in value.replace(" ", "").split(",") if v]
    return [int(v) for v in value]


class RunConfig(BaseModel):
    """One batch invocation; None means the catalog or settings default"""
    model_config = ConfigDict(extra="forbid")

    problem: str
    n: List[int] = [10]
    tol: Optional[float] = None
    max_iter: Optional[int] = None
    guess: Optional[str] = None
    guess_file: Optional[Path] = None
    guess_scale: Optional[float] = None
    damping: bool = False
    study: Optional[List[int]] = None
    csv: Optional[Path] = None
    dump_matrix: Optional[Path] = None
    bound: bool = False
    m0: Optional[float] = None
    M1: Optional[float] = None
    M2: Optional[float] = None
    continuous_error: bool = False
    method: Optional[str] = None
    log_dir: Optional[str] = None
    jitter: float = 0.0
    seed: int = 0

    @field_validator("problem")
    @classmethod
    def known_problem(cls, v: str) -> str:
        if v not in CATALOG:
            raise ValueError(f"unknown problem '{v}'; choose one of {', '.join(problem_ids())}")
        return v

    @field_validator("n", "study", mode="before")
    @classmethod
    def parse_sizes(cls, v):
        return None if v is None else _int_list(v)

    @field_validator("n", "study")
    @classmethod
    def sizes_positive(cls, v):
        if v is not None and (not v or min(v) < 1):
            raise ValueError("grid sizes must be positive integers")
        return v

    @field_validator("guess")
    @classmethod
    def known_guess(cls, v):
        if v is not None and v not in GUESS_CHOICES:
            raise ValueError(f"guess must be one of {', '.join(GUESS_CHOICES)}")
        return v

    @model_validator(mode="after")
    def consistent(self):
        if self.bound and None in (self.m0, self.M1, self.M2):
            raise ValueError("--bound requires --m0, --M1 and --M2")
        if self.guess == "file" and self.guess_file is None:
            raise ValueError("guess = file requires guess_file")
        return self

    def newton_config(self, entry: CatalogEntry) -> NewtonConfig:
        if self.guess is None:
            guess, scale = entry.guess, entry.guess_scale
        else:
            guess, scale = GUESS_CHOICES[self.guess], 1.0
        values = {"guess": guess, "guess_scale": scale if self.guess_scale is None else self.guess_scale,
                  "guess_file": self.guess_file, "damping": self.damping,
                  "guess_jitter": self.jitter, "seed": self.seed}
        if self.tol is not None:
            values["tol"] = self.tol
        if self.max_iter is not None:
            values["max_iter"] = self.max_iter
        return NewtonConfig(**values)

    def bound_inputs(self) -> Optional[BoundInputs]:
        if not self.bound:
            return None
        return BoundInputs(m0=self.m0, M1=self.M1, M2=self.M2)


def load_config_file(path: Path) -> Dict[str, str]:
    """key = value per line, '#' starts a comment, dashes in keys become underscores"""
    values = {}
    try:
        lines = Path(path).read_text().splitlines()
    except OSError as e:
        raise ConfigurationError(f"Cannot read config file {path}: {e}") from e
    for number, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        if not sep or not key.strip():
            raise ConfigurationError(f"{path}:{number}: expected 'key = value', got '{line}'")
        values[key.strip().replace("-", "_")] = value.strip()
    return values


class _UsageParser(argparse.ArgumentParser):
    """argparse with usage errors raised instead of exiting with status 2"""

    def error(self, message):
        raise ConfigurationError(f"{self.prog}: {message}")


def build_parser() -> argparse.ArgumentParser:
    parser = _UsageParser(prog="fredholm", description="Nonlinear weakly singular Fredholm solver")
    sub = parser.add_subparsers(dest="command", required=True)

    sub.add_parser("list", help="List catalog problems")

    run = sub.add_parser("run", help="Assemble and solve a catalog problem")
    run.add_argument("problem_id", nargs="?", help="Catalog problem id")
    run.add_argument("--problem", help="Catalog problem id (alternative to the positional)")
    run.add_argument("--config", type=Path, help="key = value file; flags override it")
    run.add_argument("--n", help="Grid size or comma-separated list")
    run.add_argument("--tol", type=float)
    run.add_argument("--max-iter", dest="max_iter", type=int)
    run.add_argument("--guess", choices=list(GUESS_CHOICES))
    run.add_argument("--guess-file", dest="guess_file", type=Path)
    run.add_argument("--guess-scale", dest="guess_scale", type=float)
    run.add_argument("--damping", action="store_true", default=None)
    run.add_argument("--study", help="Comma-separated grid sizes for a convergence study")
    run.add_argument("--csv", type=Path, help="Write iteration or study table as CSV")
    run.add_argument("--dump-matrix", dest="dump_matrix", type=Path)
    run.add_argument("--bound", action="store_true", default=None, help="Report error bound terms")
    run.add_argument("--m0", type=float)
    run.add_argument("--M1", type=float)
    run.add_argument("--M2", type=float)
    run.add_argument("--continuous-error", dest="continuous_error", action="store_true", default=None)
    run.add_argument("--method", choices=["auto", "exact", "quadrature"])
    run.add_argument("--log-dir", dest="log_dir")
    run.add_argument("--jitter", type=float, help="Uniform perturbation amplitude added to the initial guess")
    run.add_argument("--seed", type=int, help="Seed for --jitter")
    return parser


def config_from_args(args: argparse.Namespace) -> RunConfig:
    values: Dict[str, object] = {}
    if args.config is not None:
        values.update(load_config_file(args.config))
    flags = {k: v for k, v in vars(args).items() if k not in ("command", "config", "problem_id") and v is not None}
    values.update(flags)
    if args.problem_id is not None:
        if args.problem is not None and args.problem != args.problem_id:
            raise ConfigurationError(f"Conflicting problems '{args.problem_id}' and '{args.problem}'")
        values["problem"] = args.problem_id
    if "problem" not in values:
        raise ConfigurationError("No problem given; use 'list' to see the catalog")
    return RunConfig(**values)


def format_report(problem_id: str, n: int, report: NewtonReport) -> str:
    """Newton table: k, relative error (when known) and residual norm, two significant digits"""
    lines = [f"{problem_id}  n = {n}"]
    has_error = report.relative_errors is not None
    lines.append(f"{'k':>3}  {'rel. error':>10}  {'residual':>10}" if has_error else f"{'k':>3}  {'residual':>10}")
    for k, res in enumerate(report.residual_norms):
        if has_error:
            lines.append(f"{k:>3}  {report.relative_errors[k]:>10.1e}  {res:>10.1e}")
        else:
            lines.append(f"{k:>3}  {res:>10.1e}")
    if report.converged:
        lines.append(f"converged in {report.iterations} iterations")
    else:
        lines.append(f"NOT converged: {report.failure_reason}")
    return "\n".join(lines)


def iteration_frame(n: int, report: NewtonReport) -> pd.DataFrame:
    count = len(report.residual_norms)
    errors = report.relative_errors if report.relative_errors is not None else [np.nan] * count
    return pd.DataFrame(
        {"n": [n] * count, "k": list(range(count)), "relative_error": errors,
         "residual_norm": report.residual_norms},
        columns=ITERATION_COLUMNS,
    )


def _matrix_path(path: Path, n: int, several: bool) -> Path:
    return path.with_name(f"{path.stem}_n{n}{path.suffix}") if several else path


def _run_study(cfg: RunConfig, entry: CatalogEntry, out: TextIO) -> int:
    problem = entry.build()
    result = convergence_study(
        problem, cfg.study, cfg.newton_config(entry),
        bound_inputs=cfg.bound_inputs(),
        with_continuous_error=cfg.continuous_error,
        method=cfg.method,
    )
    frame = result.to_frame()
    print(f"{entry.id}  convergence study", file=out)
    print(frame.to_string(index=False, float_format=lambda v: f"{v:.3e}"), file=out)
    print(f"fitted order: {result.order:.3f}", file=out)
    if cfg.csv:
        result.to_csv(cfg.csv)
    return EXIT_OK if all(r.converged for r in result.rows) else EXIT_NOT_CONVERGED


def _run_solves(cfg: RunConfig, entry: CatalogEntry, out: TextIO) -> int:
    problem = entry.build()
    newton = cfg.newton_config(entry)
    frames = []
    all_converged = True
    for n in cfg.n:
        grid = UniformGrid(problem.a, problem.b, n)
        system = assemble(problem, grid, method=cfg.method)
        if cfg.dump_matrix:
            dump_system(system, _matrix_path(cfg.dump_matrix, n, len(cfg.n) > 1))
        C_ref = cell_means(problem.phi_ref, grid) if entry.exact_discrete else None
        report = newton_solve(system, newton, C_ref, expect_root=entry.exact_discrete)
        all_converged = all_converged and report.converged

        print(format_report(entry.id, n, report), file=out)
        if cfg.bound:
            print(f"error bound terms: {error_bound_terms(problem.L, problem.phi_ref, grid, cfg.bound_inputs()):.3e}",
                  file=out)
        print(file=out)
        frames.append(iteration_frame(n, report))

    if cfg.csv:
        cfg.csv.parent.mkdir(parents=True, exist_ok=True)
        pd.concat(frames, ignore_index=True).to_csv(cfg.csv, index=False, float_format="%.16e")
        logger.info(f"Wrote iteration table to {cfg.csv}")
    return EXIT_OK if all_converged else EXIT_NOT_CONVERGED


def run(cfg: RunConfig, out: Optional[TextIO] = None) -> int:
    """Execute one configuration; returns the exit status"""
    out = out or sys.stdout
    entry = get_entry(cfg.problem)
    run_logger, log_path = setup_run_logger(entry.id, cfg.log_dir)
    handler = run_logger._run_handler
    try:
        run_logger.info(f"Run '{entry.id}' with {cfg.model_dump(exclude_none=True)}")
        if log_path:
            run_logger.info(f"Logging to {log_path}")
        if cfg.study:
            status = _run_study(cfg, entry, out)
        else:
            status = _run_solves(cfg, entry, out)
        run_logger.info(f"Run '{entry.id}' finished with exit status {status}")
        return status
    finally:
        logging.getLogger("app").removeHandler(handler)
        handler.close()


def list_problems(out: Optional[TextIO] = None) -> int:
    out = out or sys.stdout
    for problem_id in problem_ids():
        print(f"{problem_id:<18} {CATALOG[problem_id].description}", file=out)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    """Main entry point"""
    logging.basicConfig(level=getattr(logging, settings.log_level.upper(), logging.INFO))

    try:
        args = build_parser().parse_args(argv)
        if args.command == "list":
            return list_problems()
        cfg = config_from_args(args)
        return run(cfg)
    except (ConfigurationError, ValidationError) as e:
        print(f"usage error: {e}", file=sys.stderr)
        return EXIT_USAGE
    except FredholmError as e:
        logger.error(f"Run failed: {e}", exc_info=True)
        return EXIT_FAILURE


if __name__ == "__main__":
    sys.exit(main())
