"""
Newton's method for F_n(C) = A N(C) - C - Y = 0
"""
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import List, Optional, Union

import numpy as np
from pydantic import BaseModel, Field, field_validator
from scipy.linalg import lu_factor, lu_solve

from app.assembly import DiscreteSystem, residual
from app.config import settings
from app.exceptions import ConfigurationError, DimensionMismatchError, SingularJacobianError
from app.grid import CellVector, cell_means, l1_distance

logger = logging.getLogger(__name__)

DAMPING_FACTORS = (1.0, 0.5, 0.25, 0.125)


class GuessPolicy(str, enum.Enum):
    ZEROS = "zeros"
    YMEANS = "ymeans"  # cell means of -y
    REFERENCE = "reference"  # cell means of the problem's reference solution
    USER = "user"  # explicit values or a whitespace-separated text file


class NewtonConfig(BaseModel):
    guess: GuessPolicy = GuessPolicy.ZEROS
    guess_scale: float = 1.0
    guess_values: Optional[List[float]] = None
    guess_file: Optional[Path] = None
    guess_jitter: float = 0.0  # uniform perturbation amplitude added to the guess
    seed: int = 0
    tol: float = Field(default_factory=lambda: settings.newton_tol)
    max_iter: int = Field(default_factory=lambda: settings.newton_max_iter)
    damping: bool = False

    @field_validator("guess_jitter")
    @classmethod
    def jitter_non_negative(cls, v: float) -> float:
        if v < 0:
            raise ValueError("guess_jitter must be non-negative")
        return v

    @field_validator("tol")
    @classmethod
    def tol_positive(cls, v: float) -> float:
        if not v > 0:
            raise ValueError("tol must be positive")
        return v

    @field_validator("max_iter")
    @classmethod
    def max_iter_positive(cls, v: int) -> int:
        if v < 1:
            raise ValueError("max_iter must be at least 1")
        return v


@dataclass
class NewtonReport:
    """Iterate history of one Newton run; iterates[0] is the initial guess"""
    iterates: List[CellVector] = field(default_factory=list)
    residual_norms: List[float] = field(default_factory=list)
    relative_errors: Optional[List[float]] = None
    converged: bool = False
    iterations: int = 0
    jacobian_condition_estimate: float = float("nan")
    failure_reason: Optional[str] = None

    @property
    def solution(self) -> CellVector:
        return self.iterates[-1]


def scaled_norm(sys: DiscreteSystem, v: np.ndarray) -> float:
    """Discrete L1 norm h * sum |v_i|"""
    return float(sys.grid.h * np.sum(np.abs(v)))


def jacobian(sys: DiscreteSystem, X: Union[CellVector, np.ndarray]) -> np.ndarray:
    """F_n'(X) = A diag(N'(X)) - I"""
    x = X.values if isinstance(X, CellVector) else np.asarray(X)
    if x.shape != (sys.grid.n,):
        raise DimensionMismatchError(f"Expected a vector of length {sys.grid.n}, got shape {x.shape}")
    return sys.A * sys.problem.N.prime(x)[None, :] - np.eye(sys.grid.n)


def solve_linear(J: np.ndarray, r: np.ndarray) -> np.ndarray:
    """Solve J x = r by LU with partial pivoting"""
    J = np.asarray(J)
    r = np.asarray(r)
    if J.ndim != 2 or J.shape[0] != J.shape[1] or r.shape != (J.shape[0],):
        raise DimensionMismatchError(f"Cannot solve system with J{J.shape} and r{r.shape}")
    if not np.all(np.isfinite(J)):
        raise SingularJacobianError("Jacobian has non-finite entries")
    lu, piv = lu_factor(J, check_finite=False)
    pivots = np.abs(np.diag(lu))
    smallest = int(np.argmin(pivots))
    if pivots[smallest] < settings.singular_pivot:
        raise SingularJacobianError(
            f"Jacobian is singular (pivot {smallest} = {pivots[smallest]:.3e})",
            pivot_index=smallest,
        )
    return lu_solve((lu, piv), r, check_finite=False)


def initial_guess(sys: DiscreteSystem, cfg: NewtonConfig) -> CellVector:
    grid = sys.grid
    p = sys.problem
    if cfg.guess is GuessPolicy.ZEROS:
        values = np.zeros(grid.n)
    elif cfg.guess is GuessPolicy.YMEANS:
        values = -np.asarray(sys.Y)
    elif cfg.guess is GuessPolicy.REFERENCE:
        if p.phi_ref is None:
            raise ConfigurationError(f"Problem '{p.label}' has no reference solution for the guess")
        values = cell_means(p.phi_ref, grid).values
    else:
        if cfg.guess_values is not None:
            values = np.asarray(cfg.guess_values, dtype=float)
        elif cfg.guess_file is not None:
            values = np.loadtxt(cfg.guess_file, ndmin=1)
        else:
            raise ConfigurationError("User guess needs guess_values or guess_file")
        if values.shape != (grid.n,):
            raise ConfigurationError(f"User guess has {values.size} values, grid has {grid.n} cells")
    values = cfg.guess_scale * values
    if cfg.guess_jitter > 0:
        rng = np.random.default_rng(cfg.seed)
        values = values + cfg.guess_jitter * rng.uniform(-1.0, 1.0, size=grid.n)
    return CellVector(grid, values)


def _step_length(sys: DiscreteSystem, x: np.ndarray, step: np.ndarray, current: float) -> float:
    """First factor in DAMPING_FACTORS that reduces the residual norm"""
    for factor in DAMPING_FACTORS:
        trial = scaled_norm(sys, residual(sys, x + factor * step))
        if trial < current:
            return factor
    return DAMPING_FACTORS[-1]


def newton_solve(
    sys: DiscreteSystem,
    cfg: Optional[NewtonConfig] = None,
    C_ref: Optional[CellVector] = None,
    expect_root: bool = False,
) -> NewtonReport:
    """
    Newton iteration C <- C - F'(C)^{-1} F(C) with dense LU solves.

    Stops when both the scaled step and the scaled residual are below
    tol * (1 + norm), or after max_iter steps. Non-convergence and a
    singular Jacobian are reported, never raised; the history up to that
    point is kept.

    expect_root declares C_ref an exact root of the discrete system: a run
    that settles with relative error above settings.root_match_rtol is then
    reported as not converged (it found another root).
    """
    cfg = cfg or NewtonConfig()
    guess = initial_guess(sys, cfg)
    if C_ref is not None and C_ref.grid != sys.grid:
        raise DimensionMismatchError("Reference solution lives on a different grid")
    if expect_root and C_ref is None:
        raise ConfigurationError("expect_root needs the reference root C_ref")

    y_norm = scaled_norm(sys, sys.Y)
    ref_norm = C_ref.l1_norm() if C_ref is not None else None

    report = NewtonReport(relative_errors=[] if C_ref is not None else None)

    def record(x: np.ndarray, F: np.ndarray) -> CellVector:
        vector = CellVector(sys.grid, x)
        report.iterates.append(vector)
        report.residual_norms.append(scaled_norm(sys, F))
        if C_ref is not None:
            distance = l1_distance(vector, C_ref)
            report.relative_errors.append(distance / ref_norm if ref_norm > 0 else distance)
        return vector

    x = np.array(guess.values)
    F = residual(sys, x)
    record(x, F)
    J = None

    for k in range(1, cfg.max_iter + 1):
        J = jacobian(sys, x)
        try:
            step = solve_linear(J, -F)
        except SingularJacobianError as e:
            report.failure_reason = str(e)
            logger.warning(f"Newton stopped at iteration {k}: {e}")
            break

        factor = _step_length(sys, x, step, report.residual_norms[-1]) if cfg.damping else 1.0
        x = x + factor * step
        F = residual(sys, x)
        record(x, F)
        report.iterations = k

        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(F))):
            report.failure_reason = f"non-finite iterate at iteration {k}"
            logger.warning(f"Newton produced a non-finite iterate at iteration {k}")
            break

        step_norm = factor * scaled_norm(sys, step)
        logger.debug(
            f"Newton k={k}: step={step_norm:.3e} residual={report.residual_norms[-1]:.3e}"
            + (f" rel_error={report.relative_errors[-1]:.3e}" if C_ref is not None else "")
        )
        if (step_norm <= cfg.tol * (1.0 + scaled_norm(sys, x))
                and report.residual_norms[-1] <= cfg.tol * (1.0 + y_norm)):
            report.converged = True
            break

    if report.converged and expect_root and report.relative_errors[-1] > settings.root_match_rtol:
        report.converged = False
        report.failure_reason = (
            f"converged to a different discrete root (relative error {report.relative_errors[-1]:.1e})"
        )
        logger.warning(
            f"Newton for '{sys.problem.label}' (n={sys.grid.n}) settled away from the reference root; "
            f"relative error {report.relative_errors[-1]:.3e}"
        )

    if report.converged:
        J = jacobian(sys, x)
    elif report.failure_reason is None:
        report.failure_reason = f"no convergence within {cfg.max_iter} iterations"
        logger.warning(
            f"Newton did not converge for '{sys.problem.label}' (n={sys.grid.n}) "
            f"after {cfg.max_iter} iterations; residual {report.residual_norms[-1]:.3e}"
        )
    if J is not None and np.all(np.isfinite(J)):
        try:
            report.jacobian_condition_estimate = float(np.linalg.cond(J, 1))
        except np.linalg.LinAlgError:
            report.jacobian_condition_estimate = float("inf")

    if report.converged:
        logger.info(
            f"Newton converged for '{sys.problem.label}' (n={sys.grid.n}) in {report.iterations} iterations"
        )
    return report
