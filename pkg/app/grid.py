"""
Uniform meshes, the piecewise-constant projection and the moduli w1, w2
"""
import logging
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from app.config import settings
from app.exceptions import ConfigurationError, DimensionMismatchError, DomainError, QuadratureError
from app.quadrature import adaptive_gauss, evaluate, mapped_rule

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class UniformGrid:
    """Mesh t_i = a + i h, h = (b - a) / n, on [a, b]"""
    a: float
    b: float
    n: int

    def __post_init__(self):
        if not (np.isfinite(self.a) and np.isfinite(self.b)) or self.b <= self.a:
            raise ConfigurationError(f"Grid needs finite a < b, got [{self.a}, {self.b}]")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigurationError(f"Grid needs at least one cell, got n={self.n}")

    @property
    def h(self) -> float:
        return (self.b - self.a) / self.n

    @property
    def nodes(self) -> np.ndarray:
        t = self.a + np.arange(self.n + 1) * self.h
        t[-1] = self.b
        return t

    def cell(self, j: int) -> Tuple[float, float]:
        """Endpoints of cell j (0-based): [t_j, t_{j+1}]"""
        if not 0 <= j < self.n:
            raise DomainError(f"Cell index {j} outside 0..{self.n - 1}")
        nodes = self.nodes
        return float(nodes[j]), float(nodes[j + 1])

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        slack = 4 * np.finfo(float).eps * max(abs(self.a), abs(self.b), 1.0)
        return (x >= self.a - slack) & (x <= self.b + slack)

    def locate(self, x) -> np.ndarray:
        """Index of the cell containing each x; nodes belong to the cell on their right"""
        x = np.asarray(x, dtype=float)
        if not np.all(self.contains(x)):
            raise DomainError(f"Points outside [{self.a}, {self.b}]")
        index = np.floor((x - self.a) / self.h).astype(int)
        return np.clip(index, 0, self.n - 1)


@dataclass(frozen=True)
class Integrable1D:
    """
    An L1 function on [a, b]: a vectorized evaluator, the finitely many
    points where it jumps, and optionally a closed-form mean over
    subintervals which cell_means prefers over quadrature.
    """
    func: Callable[[np.ndarray], np.ndarray]
    a: float
    b: float
    jumps: Tuple[float, ...] = ()
    mean: Optional[Callable[[float, float], complex]] = None
    label: str = ""

    def __post_init__(self):
        if self.b <= self.a:
            raise ConfigurationError(f"Function domain needs a < b, got [{self.a}, {self.b}]")
        inside = tuple(sorted(float(j) for j in self.jumps if self.a < j < self.b))
        object.__setattr__(self, "jumps", inside)

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        return evaluate(self.func, s)

    def extended(self, s) -> np.ndarray:
        """Zero extension outside [a, b]"""
        s = np.asarray(s, dtype=float)
        inside = (s >= self.a) & (s <= self.b)
        values = evaluate(self.func, np.clip(s, self.a, self.b))
        return np.where(inside, values, 0.0)

    def breakpoints(self, lo: float, hi: float) -> np.ndarray:
        """lo, hi and every declared jump strictly between them"""
        inner = [j for j in self.jumps if lo < j < hi]
        return np.array([lo, *inner, hi])

    @classmethod
    def constant(cls, value: complex, a: float, b: float, label: str = "") -> "Integrable1D":
        return cls(
            func=lambda s: np.full(np.shape(s), value),
            a=a,
            b=b,
            mean=lambda lo, hi: value,
            label=label or f"constant {value}",
        )

    @classmethod
    def piecewise_constant(
        cls,
        breaks: Sequence[float],
        values: Sequence[complex],
        label: str = "",
    ) -> "Integrable1D":
        """Step function taking values[k] on [breaks[k], breaks[k+1]]"""
        edges = np.asarray(breaks, dtype=float)
        levels = np.asarray(values)
        if len(edges) != len(levels) + 1 or np.any(np.diff(edges) <= 0):
            raise ConfigurationError("piecewise_constant needs increasing breaks and one value per piece")

        def func(s):
            index = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(levels) - 1)
            return levels[index]

        def mean(lo, hi):
            # Overlap length of [lo, hi] with each piece
            overlap = np.clip(np.minimum(edges[1:], hi) - np.maximum(edges[:-1], lo), 0.0, None)
            touched = np.flatnonzero(overlap > 0)
            if len(touched) == 1:
                return levels[touched[0]]
            return np.dot(overlap, levels) / (hi - lo)

        return cls(
            func=func,
            a=float(edges[0]),
            b=float(edges[-1]),
            jumps=tuple(edges[1:-1]),
            mean=mean,
            label=label or "piecewise constant",
        )

    @classmethod
    def from_callable(
        cls,
        func: Callable,
        a: float,
        b: float,
        jumps: Sequence[float] = (),
        label: str = "",
    ) -> "Integrable1D":
        return cls(func=func, a=a, b=b, jumps=tuple(jumps), label=label)


@dataclass(frozen=True, eq=False)
class CellVector:
    """Cell means c_0..c_{n-1} of a piecewise-constant function on a grid"""
    grid: UniformGrid
    values: np.ndarray = field(repr=False)

    def __post_init__(self):
        values = np.array(self.values)
        if values.ndim != 1 or len(values) != self.grid.n:
            raise DimensionMismatchError(
                f"CellVector needs {self.grid.n} values, got shape {values.shape}"
            )
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    def __len__(self) -> int:
        return self.grid.n

    def l1_norm(self) -> float:
        """L1 norm of the piecewise-constant function, h * sum |c_i|"""
        return float(self.grid.h * np.sum(np.abs(self.values)))

    def as_function(self) -> Integrable1D:
        return Integrable1D.piecewise_constant(self.grid.nodes, self.values, label="cell vector")

    @classmethod
    def zeros(cls, grid: UniformGrid) -> "CellVector":
        return cls(grid, np.zeros(grid.n))


def l1_distance(x: CellVector, y: CellVector) -> float:
    """Discrete L1 distance h * sum |x_i - y_i|"""
    if x.grid != y.grid:
        raise DimensionMismatchError("Cell vectors live on different grids")
    return float(x.grid.h * np.sum(np.abs(x.values - y.values)))


def _piece_integral(f: Callable, lo: float, hi: float, order: int, rtol: float) -> complex:
    return adaptive_gauss(
        f, lo, hi, order,
        rtol=rtol,
        max_intervals=settings.cell_mean_max_intervals,
    ).value


def cell_means(
    f: Integrable1D,
    grid: UniformGrid,
    order: Optional[int] = None,
    rtol: Optional[float] = None,
) -> CellVector:
    """
    Projection pi_n: the mean of f over every grid cell.

    The exact-mean contract of f is used when present; otherwise each cell
    is split at the declared jumps and integrated with adaptive
    Gauss-Legendre. Each cell is computed independently of the others.
    """
    order = order or settings.cell_mean_order
    rtol = settings.cell_mean_rtol if rtol is None else rtol
    nodes = grid.nodes
    means = []

    for i in range(grid.n):
        lo, hi = float(nodes[i]), float(nodes[i + 1])
        if f.mean is not None:
            means.append(f.mean(lo, hi))
            continue
        edges = f.breakpoints(lo, hi)
        try:
            total = sum(
                _piece_integral(f, float(p), float(q), order, rtol)
                for p, q in zip(edges[:-1], edges[1:])
            )
        except QuadratureError as e:
            raise QuadratureError(f"Cell mean failed on cell {i} [{lo}, {hi}]: {e}", cell=i) from e
        means.append(total / (hi - lo))

    return CellVector(grid, np.asarray(means))


def projection_error(f: Integrable1D, grid: UniformGrid, order: Optional[int] = None) -> float:
    """L1 distance between f and its piecewise-constant projection"""
    order = order or settings.cell_mean_order
    projected = cell_means(f, grid)
    nodes = grid.nodes
    total = 0.0
    for i in range(grid.n):
        lo, hi = float(nodes[i]), float(nodes[i + 1])
        c = projected.values[i]
        edges = f.breakpoints(lo, hi)
        for p, q in zip(edges[:-1], edges[1:]):
            total += _piece_integral(
                lambda s, c=c: np.abs(f(s) - c), float(p), float(q), order, settings.cell_mean_rtol
            )
    return float(np.real(total))


def w1_oscillation(f: Integrable1D, h: float, samples: Optional[int] = None) -> float:
    """
    Oscillation w1(f, h) = sup_{0 <= u <= h} integral of |f(v + u) - f(v)| dv
    for the zero extension of f, maximized over equally spaced shifts.

    Each shifted integral is split at a, b, their shifts by -u and at every
    declared jump and its shift, so the integrand is smooth on every piece.
    """
    if h < 0:
        raise DomainError(f"w1_oscillation needs h >= 0, got {h}")
    if h == 0:
        return 0.0
    samples = samples or settings.w1_samples
    order = settings.cell_mean_order
    best = 0.0

    for u in np.linspace(0.0, h, max(samples, 2)):
        if u == 0.0:
            continue
        marks = [f.a - u, f.a, f.b - u, f.b, *f.jumps, *(j - u for j in f.jumps)]
        lo, hi = f.a - u, f.b
        edges = np.unique(np.clip(marks, lo, hi))

        def shifted(v, u=u):
            return np.abs(f.extended(v + u) - f.extended(v))

        total = 0.0
        for p, q in zip(edges[:-1], edges[1:]):
            if q > p:
                total += _piece_integral(shifted, float(p), float(q), order, settings.cell_mean_rtol)
        best = max(best, float(np.real(total)))

    return best


def w2_modulus(
    f: Callable[[np.ndarray, np.ndarray], np.ndarray],
    h: float,
    a: float,
    b: float,
    base_points: Optional[int] = None,
    directions: Optional[int] = None,
) -> float:
    """
    Modulus of continuity of f on [a, b]^2 with respect to the max-norm.

    Pairs are a base lattice point and its displacement to the max-norm
    circle of radius h in each sampled direction; displaced points are
    clipped back into the square, which only shortens the displacement.
    """
    if h < 0:
        raise DomainError(f"w2_modulus needs h >= 0, got {h}")
    if h == 0:
        return 0.0
    base_points = base_points or settings.w2_base_points
    directions = directions or settings.w2_directions

    axis = np.linspace(a, b, base_points)
    s, t = np.meshgrid(axis, axis, indexing="ij")
    reference = evaluate(lambda x: f(x, t), s)

    best = 0.0
    for angle in 2 * np.pi * np.arange(directions) / directions:
        c, d = np.cos(angle), np.sin(angle)
        scale = h / max(abs(c), abs(d))
        ds, dt = c * scale, d * scale
        moved_s = np.clip(s + ds, a, b)
        moved_t = np.clip(t + dt, a, b)
        moved = evaluate(lambda x: f(x, moved_t), moved_s)
        best = max(best, float(np.max(np.abs(moved - reference))))

    return best
