"""
Discrete nonlinear system A N(C) - C = Y of the product-integration scheme
"""
import enum
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Union

import numpy as np

from app.config import settings
from app.exceptions import AssemblyError, ConfigurationError, DimensionMismatchError, DomainError, QuadratureError
from app.grid import CellVector, Integrable1D, UniformGrid, cell_means
from app.kernel import Nonlinearity, SingularFactor, SmoothFactor
from app.quadrature import graded_gauss, mapped_rule, singular_quad

logger = logging.getLogger(__name__)


class Provenance(enum.Enum):
    DOUBLE_MOMENT = "double-moment"  # closed-form double integrals, no quadrature
    EXACT_MOMENTS = "exact-moments"  # closed-form inner moments, Gauss-Legendre outer
    ORACLE = "oracle"  # inner moments from the singular quadrature oracle


@dataclass(frozen=True)
class ProblemSpec:
    """
    The continuous equation phi = K(phi) - y on [a, b] with
    K(x)(s) = integral of H(s, t) L(s, t) N(x(t)) dt.
    """
    a: float
    b: float
    H: SingularFactor
    L: SmoothFactor
    N: Nonlinearity
    y: Integrable1D
    phi_ref: Optional[Integrable1D] = None
    label: str = ""

    def __post_init__(self):
        if self.b <= self.a:
            raise ConfigurationError(f"Problem domain needs a < b, got [{self.a}, {self.b}]")
        for name, f in (("y", self.y), ("phi_ref", self.phi_ref)):
            if f is not None and (f.a, f.b) != (self.a, self.b):
                raise ConfigurationError(
                    f"{name} is defined on [{f.a}, {f.b}], problem domain is [{self.a}, {self.b}]"
                )


@dataclass(frozen=True, eq=False)
class DiscreteSystem:
    """Matrix A_n, right-hand side Y_n and where A's accuracy comes from"""
    grid: UniformGrid
    A: np.ndarray = field(repr=False)
    Y: np.ndarray = field(repr=False)
    problem: ProblemSpec
    provenance: Provenance

    def __post_init__(self):
        n = self.grid.n
        if self.A.shape != (n, n) or self.Y.shape != (n,):
            raise DimensionMismatchError(
                f"System shapes A{self.A.shape}, Y{self.Y.shape} do not match n={n}"
            )
        self.A.setflags(write=False)
        self.Y.setflags(write=False)

    def vector(self, values) -> CellVector:
        return CellVector(self.grid, values)


def weight_matrix(H: SingularFactor, L: SmoothFactor, grid: UniformGrid, s) -> np.ndarray:
    """
    w_{n,j}(s) for every cell j at every point s, shape (len(s), n).

    [L(s, t)]_n is affine in t on each cell, so each weight is a
    combination of the two singular moments of the cell.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))[:, None]
    nodes = grid.nodes
    lo, hi = nodes[:-1][None, :], nodes[1:][None, :]
    m0, m1 = H.moments(s, lo, hi)
    if L.is_constant_one:
        return m0
    left, right = L(s, lo), L(s, hi)
    return (left * (hi * m0 - m1) + right * (m1 - lo * m0)) / grid.h


def _cell_weights(H: SingularFactor, L: SmoothFactor, grid: UniformGrid, j: int, s) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    lo, hi = grid.cell(j)
    m0, m1 = H.moments(s, lo, hi)
    if L.is_constant_one:
        return m0
    left, right = L(s, lo), L(s, hi)
    return (left * (hi * m0 - m1) + right * (m1 - lo * m0)) / grid.h


def weight(H: SingularFactor, L: SmoothFactor, grid: UniformGrid, j: int, s) -> np.ndarray:
    """w_{n,j}(s) = integral over cell j of H(s, t) [L(s, t)]_n dt (j is 0-based)"""
    if not np.all(grid.contains(s)):
        raise DomainError(f"s outside [{grid.a}, {grid.b}]")
    return _cell_weights(H, L, grid, j, s)


def _band_entry(p: ProblemSpec, grid: UniformGrid, i: int, j: int) -> complex:
    """
    (1/h) integral over cell i of w_{n,j}(s) ds for |i - j| <= 1, where
    w_{n,j} has an unbounded derivative at the ends of cell j.
    """
    lo, hi = grid.cell(i)
    order = settings.outer_order
    pieces = settings.graded_subintervals

    def integrand(s):
        return _cell_weights(p.H, p.L, grid, j, s)

    if j == i:
        mid = 0.5 * (lo + hi)
        total = (
            graded_gauss(integrand, lo, mid - lo, order, pieces)
            + graded_gauss(integrand, hi, mid - hi, order, pieces)
        )
    elif j == i - 1:
        total = graded_gauss(integrand, lo, hi - lo, order, pieces)
    else:
        total = graded_gauss(integrand, hi, lo - hi, order, pieces)
    return total / grid.h


def _failing_column(p: ProblemSpec, grid: UniformGrid, s: np.ndarray) -> Optional[int]:
    """First cell j whose weights at the points s cannot be computed"""
    for j in range(grid.n):
        try:
            _cell_weights(p.H, p.L, grid, j, s)
        except QuadratureError:
            return j
    return None


def _quadrature_matrix(p: ProblemSpec, grid: UniformGrid) -> np.ndarray:
    n, h = grid.n, grid.h
    rows = []
    for i in range(n):
        lo, hi = grid.cell(i)
        x, w = mapped_rule(lo, hi, settings.outer_order)
        try:
            far = w @ weight_matrix(p.H, p.L, grid, x) / h
        except QuadratureError as e:
            j = e.cell if e.cell is not None else _failing_column(p, grid, x)
            raise AssemblyError(f"Quadrature failed for entry ({i}, {j}): {e}", entry=(i, j)) from e

        band = {}
        for j in range(max(0, i - 1), min(n, i + 2)):
            try:
                band[j] = _band_entry(p, grid, i, j)
            except QuadratureError as e:
                raise AssemblyError(f"Quadrature failed for entry ({i}, {j}): {e}", entry=(i, j)) from e

        row = np.array(far, dtype=np.result_type(far, *band.values()))
        for j, value in band.items():
            row[j] = value
        rows.append(row)
    return np.vstack(rows)


def assemble(p: ProblemSpec, grid: UniformGrid, method: Optional[str] = None) -> DiscreteSystem:
    """
    Build A_n(i, j) = (1/h) integral over cell i of w_{n,j}(s) ds and
    Y_n(i) = mean of y over cell i.

    method: "exact" integrates both variables in closed form (built-in H
    with L = 1), "quadrature" uses Gauss-Legendre in s with graded
    refinement on the band |i - j| <= 1, "auto" picks exact when it applies.
    """
    method = method or settings.assembly_method
    if method not in ("auto", "exact", "quadrature"):
        raise ConfigurationError(f"Unknown assembly method '{method}'")
    if (grid.a, grid.b) != (p.a, p.b):
        raise ConfigurationError(
            f"Grid on [{grid.a}, {grid.b}] does not match problem domain [{p.a}, {p.b}]"
        )

    exact_available = p.H.has_double_moment and p.L.is_constant_one
    if method == "exact" and not exact_available:
        raise ConfigurationError("Exact assembly needs a built-in singular factor and L = 1")

    if method == "exact" or (method == "auto" and exact_available):
        nodes = grid.nodes
        A = p.H.double_moment(
            nodes[:-1][:, None], nodes[1:][:, None], nodes[:-1][None, :], nodes[1:][None, :]
        ) / grid.h
        provenance = Provenance.DOUBLE_MOMENT
    else:
        A = _quadrature_matrix(p, grid)
        provenance = Provenance.EXACT_MOMENTS if p.H.has_exact_moments else Provenance.ORACLE

    bad = np.argwhere(~np.isfinite(A))
    if len(bad):
        i, j = (int(v) for v in bad[0])
        raise AssemblyError(f"Matrix entry ({i}, {j}) is not finite", entry=(i, j))

    try:
        Y = cell_means(p.y, grid).values
    except QuadratureError as e:
        raise AssemblyError(f"Right-hand side failed on cell {e.cell}: {e}") from e

    if provenance is Provenance.ORACLE:
        logger.warning(f"Assembled '{p.label}' (n={grid.n}) with oracle moments")
    logger.info(f"Assembled '{p.label}' with n={grid.n} ({provenance.value})")
    return DiscreteSystem(grid=grid, A=np.array(A), Y=np.array(Y), problem=p, provenance=provenance)


def _as_values(sys: DiscreteSystem, X: Union[CellVector, np.ndarray]) -> np.ndarray:
    if isinstance(X, CellVector):
        if X.grid != sys.grid:
            raise DimensionMismatchError(f"Vector grid {X.grid} differs from system grid {sys.grid}")
        return X.values
    values = np.asarray(X)
    if values.shape != (sys.grid.n,):
        raise DimensionMismatchError(f"Expected a vector of length {sys.grid.n}, got shape {values.shape}")
    return values


def residual(sys: DiscreteSystem, X: Union[CellVector, np.ndarray]) -> np.ndarray:
    """F_n(X) = A N(X) - X - Y with N applied entrywise"""
    x = _as_values(sys, X)
    return sys.A @ sys.problem.N(x) - x - sys.Y


def apply_operator(p: ProblemSpec, phi: Integrable1D, s) -> np.ndarray:
    """
    K(phi)(s) by the singular quadrature oracle, split at the jumps of phi.
    Used to manufacture right-hand sides with a known solution.
    """
    s = np.atleast_1d(np.asarray(s, dtype=float))
    edges = np.unique([p.a, *phi.jumps, p.b])
    values = []
    for point in s:
        def integrand(t, point=point):
            return p.H.unchecked(point, t) * p.L(point, t) * p.N(phi(t))

        total = 0.0
        for lo, hi in zip(edges[:-1], edges[1:]):
            singular = point if lo <= point <= hi else None
            total += singular_quad(integrand, float(lo), float(hi), singular_point=singular).value
        values.append(total)
    return np.asarray(values)


def dump_system(sys: DiscreteSystem, path: Union[str, Path]) -> Path:
    """Write A (row-major, one row per line) and then Y, in %.16e notation"""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    n = sys.grid.n
    with open(path, "w") as f:
        np.savetxt(
            f, sys.A, fmt="%.16e",
            header=f"A_n for '{sys.problem.label}', n={n}, [{sys.grid.a}, {sys.grid.b}], {sys.provenance.value}",
        )
        np.savetxt(f, sys.Y[None, :], fmt="%.16e", header="Y_n")
    logger.info(f"Wrote {n}x{n} system to {path}")
    return path
