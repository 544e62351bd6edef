"""
Kernel factors H (weakly singular), L (continuous) and the nonlinearity N
"""
import enum
import logging
from dataclasses import dataclass
from typing import Callable, Optional, Tuple

import numpy as np

from app.config import settings
from app.exceptions import ConfigurationError, DomainError
from app.grid import UniformGrid
from app.quadrature import singular_quad

logger = logging.getLogger(__name__)

MomentContract = Callable[[float, float, float], Tuple[complex, complex]]


class SingularKind(enum.Enum):
    LOG_DISTANCE = "log"
    POWER_DISTANCE = "power"
    CUSTOM = "custom"


def _xlogx(x: np.ndarray) -> np.ndarray:
    """x * log|x| extended by continuity to 0 at x = 0"""
    x = np.asarray(x, dtype=float)
    safe = np.where(x == 0.0, 1.0, x)
    return np.where(x == 0.0, 0.0, x * np.log(np.abs(safe)))


def _log_primitive(x):
    # d/dx = log|x|
    return _xlogx(x) - x


def _log_first_primitive(x):
    # d/dx = x log|x|
    return 0.5 * x * _xlogx(x) - 0.25 * x * x


def _log_double_primitive(x):
    # d2/dx2 = -log|x|
    return 0.75 * x * x - 0.5 * x * _xlogx(x)


@dataclass(frozen=True)
class SingularFactor:
    """
    Weakly singular factor H(s, t).

    Built-in kinds depend on |s - t| only and carry closed-form moments;
    CUSTOM factors supply a pointwise evaluator and, optionally, a moment
    contract (s, lo, hi) -> (m0, m1). Without the contract their moments
    come from the singular quadrature oracle.
    """
    kind: SingularKind
    alpha: Optional[float] = None
    evaluator: Optional[Callable[[np.ndarray, np.ndarray], np.ndarray]] = None
    moment_contract: Optional[MomentContract] = None
    label: str = ""

    def __post_init__(self):
        if self.kind is SingularKind.POWER_DISTANCE:
            if self.alpha is None or not (0.0 < self.alpha < 1.0):
                raise ConfigurationError(f"PowerDistance needs 0 < alpha < 1, got {self.alpha}")
        if self.kind is SingularKind.CUSTOM:
            if self.evaluator is None:
                raise ConfigurationError("Custom singular factor needs an evaluator")
            if self.moment_contract is None:
                logger.warning(
                    f"Singular factor '{self.label or 'custom'}' has no moment contract; "
                    f"moments fall back to the quadrature oracle"
                )

    @classmethod
    def log_distance(cls) -> "SingularFactor":
        return cls(SingularKind.LOG_DISTANCE, label="-log|s-t|")

    @classmethod
    def power_distance(cls, alpha: float) -> "SingularFactor":
        return cls(SingularKind.POWER_DISTANCE, alpha=alpha, label=f"|s-t|^-{alpha}")

    @classmethod
    def custom(
        cls,
        evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray],
        moment_contract: Optional[MomentContract] = None,
        label: str = "custom",
    ) -> "SingularFactor":
        return cls(SingularKind.CUSTOM, evaluator=evaluator, moment_contract=moment_contract, label=label)

    @property
    def has_exact_moments(self) -> bool:
        return self.kind is not SingularKind.CUSTOM or self.moment_contract is not None

    @property
    def is_convolution(self) -> bool:
        """True when H depends on s - t only"""
        return self.kind is not SingularKind.CUSTOM

    def __call__(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind is not SingularKind.CUSTOM and np.any(s == t):
            raise DomainError(f"{self.label} is singular on the diagonal s == t")
        return self.unchecked(s, t)

    def unchecked(self, s, t) -> np.ndarray:
        """Pointwise values without the diagonal guard (infinite on s == t)"""
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.kind is SingularKind.CUSTOM:
            return np.asarray(self.evaluator(s, t))
        with np.errstate(divide="ignore"):
            distance = np.abs(s - t)
            if self.kind is SingularKind.LOG_DISTANCE:
                return -np.log(distance)
            return distance ** (-self.alpha)

    def moments(self, s, lo, hi) -> Tuple[np.ndarray, np.ndarray]:
        """
        m0 = integral of H(s, t) and m1 = integral of H(s, t) t over [lo, hi].

        Arguments broadcast against each other. Built-in kinds use closed
        forms valid for s inside, at an endpoint of, or outside the cell.
        """
        s, lo, hi = np.broadcast_arrays(
            np.asarray(s, dtype=float), np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
        )
        p, q = lo - s, hi - s

        if self.kind is SingularKind.LOG_DISTANCE:
            m0 = _log_primitive(p) - _log_primitive(q)
            m1 = s * m0 + _log_first_primitive(p) - _log_first_primitive(q)
            return m0, m1

        if self.kind is SingularKind.POWER_DISTANCE:
            beta = 1.0 - self.alpha
            m0 = (np.sign(q) * np.abs(q) ** beta - np.sign(p) * np.abs(p) ** beta) / beta
            m1 = s * m0 + (np.abs(q) ** (beta + 1.0) - np.abs(p) ** (beta + 1.0)) / (beta + 1.0)
            return m0, m1

        return self._custom_moments(s, lo, hi)

    def _custom_moments(self, s, lo, hi) -> Tuple[np.ndarray, np.ndarray]:
        m0 = np.empty(s.shape, dtype=complex)
        m1 = np.empty(s.shape, dtype=complex)
        for index in np.ndindex(s.shape):
            si, a, b = float(s[index]), float(lo[index]), float(hi[index])
            if self.moment_contract is not None:
                m0[index], m1[index] = self.moment_contract(si, a, b)
            else:
                m0[index], m1[index] = oracle_moments(self, si, a, b)
        if np.all(m0.imag == 0) and np.all(m1.imag == 0):
            return m0.real, m1.real
        return m0, m1

    @property
    def has_double_moment(self) -> bool:
        return self.kind is not SingularKind.CUSTOM

    def double_moment(self, c, d, e, f) -> np.ndarray:
        """Integral of H(s, t) over [c, d] x [e, f] in closed form (built-in kinds)"""
        if self.kind is SingularKind.LOG_DISTANCE:
            primitive = _log_double_primitive
        elif self.kind is SingularKind.POWER_DISTANCE:
            beta = 1.0 - self.alpha

            def primitive(x):
                return np.abs(x) ** (beta + 1.0) / (beta * (beta + 1.0))
        else:
            raise ConfigurationError("Double moments are only available for built-in singular factors")
        c, d, e, f = (np.asarray(v, dtype=float) for v in (c, d, e, f))
        return primitive(d - e) - primitive(c - e) - primitive(d - f) + primitive(c - f)


def oracle_moments(H: SingularFactor, s: float, lo: float, hi: float) -> Tuple[complex, complex]:
    """Moments of H over [lo, hi] by the singular quadrature oracle"""
    point = s if lo <= s <= hi else None

    def kernel(t):
        return H.unchecked(s, t)

    m0 = singular_quad(kernel, lo, hi, singular_point=point)
    m1 = singular_quad(lambda t: kernel(t) * t, lo, hi, singular_point=point)
    if not (m0.converged and m1.converged):
        logger.warning(f"Oracle moments at s={s} on [{lo}, {hi}] did not reach tolerance")
    return m0.value, m1.value


def moments(H: SingularFactor, s, cell: Tuple[float, float]) -> Tuple[np.ndarray, np.ndarray]:
    """(m0, m1) of H at s over cell = (lo, hi)"""
    lo, hi = cell
    if hi < lo:
        raise DomainError(f"Cell [{lo}, {hi}] is reversed")
    return H.moments(s, lo, hi)


@dataclass(frozen=True)
class SmoothFactor:
    """Continuous factor L(s, t) on [a, b]^2"""
    evaluator: Callable[[np.ndarray, np.ndarray], np.ndarray]
    is_constant_one: bool = False
    label: str = ""

    @classmethod
    def one(cls) -> "SmoothFactor":
        return cls(evaluator=lambda s, t: np.ones(np.broadcast(s, t).shape), is_constant_one=True, label="1")

    def __call__(self, s, t) -> np.ndarray:
        s = np.asarray(s, dtype=float)
        t = np.asarray(t, dtype=float)
        if self.is_constant_one:
            return np.ones(np.broadcast(s, t).shape)
        return np.broadcast_to(np.asarray(self.evaluator(s, t)), np.broadcast(s, t).shape)

    def max_abs(self, a: float, b: float, samples: int = 64) -> float:
        """c_L = max |L(s, t)| estimated on a samples x samples lattice"""
        axis = np.linspace(a, b, samples)
        s, t = np.meshgrid(axis, axis, indexing="ij")
        return float(np.max(np.abs(self(s, t))))


def interp_L(L: SmoothFactor, grid: UniformGrid, s, t) -> np.ndarray:
    """
    Piecewise-linear interpolant [L(s, t)]_n in t on the grid:
    ((t_i - t) L(s, t_{i-1}) + (t - t_{i-1}) L(s, t_i)) / h on the cell containing t.
    """
    t = np.asarray(t, dtype=float)
    s = np.asarray(s, dtype=float)
    if not np.all(grid.contains(t)):
        raise DomainError(f"t outside [{grid.a}, {grid.b}]")
    if L.is_constant_one:
        return np.ones(np.broadcast(s, t).shape)
    index = grid.locate(t)
    nodes = grid.nodes
    left, right = nodes[index], nodes[index + 1]
    return ((right - t) * L(s, left) + (t - left) * L(s, right)) / grid.h


@dataclass(frozen=True)
class Nonlinearity:
    """
    N with its first two derivatives. Construction checks the derivatives
    against central differences on the configured bracket.
    """
    value: Callable[[np.ndarray], np.ndarray]
    derivative: Callable[[np.ndarray], np.ndarray]
    second_derivative: Callable[[np.ndarray], np.ndarray]
    label: str = ""
    verify: bool = True

    def __post_init__(self):
        if self.verify:
            self.check_derivatives()

    def __call__(self, u):
        return self.value(np.asarray(u))

    def prime(self, u):
        return self.derivative(np.asarray(u))

    def second(self, u):
        return self.second_derivative(np.asarray(u))

    def check_derivatives(
        self,
        bracket: Optional[Tuple[float, float]] = None,
        points: Optional[int] = None,
        tol: Optional[float] = None,
    ) -> None:
        bracket = bracket or settings.derivative_check_bracket
        points = points or settings.derivative_check_points
        tol = settings.derivative_check_tol if tol is None else tol

        u = np.linspace(bracket[0], bracket[1], points)
        step = 1e-5 * np.maximum(1.0, np.abs(u))
        for name, f, df in (
            ("N'", self.value, self.derivative),
            ("N''", self.derivative, self.second_derivative),
        ):
            difference = (np.asarray(f(u + step)) - np.asarray(f(u - step))) / (2 * step)
            exact = np.asarray(df(u))
            mismatch = np.abs(difference - exact) / np.maximum(1.0, np.abs(exact))
            worst = int(np.argmax(mismatch))
            if mismatch[worst] > tol:
                raise ConfigurationError(
                    f"{name} of nonlinearity '{self.label}' disagrees with finite differences "
                    f"at u={u[worst]:.6g} (relative mismatch {mismatch[worst]:.2e})"
                )

    @classmethod
    def sine(cls, frequency: float) -> "Nonlinearity":
        """N(u) = sin(frequency * pi * u)"""
        k = frequency * np.pi
        return cls(
            value=lambda u: np.sin(k * u),
            derivative=lambda u: k * np.cos(k * u),
            second_derivative=lambda u: -k * k * np.sin(k * u),
            label=f"sin({frequency:g}*pi*u)",
        )

    @classmethod
    def square(cls) -> "Nonlinearity":
        return cls(
            value=lambda u: u * u,
            derivative=lambda u: 2.0 * u,
            second_derivative=lambda u: np.full(np.shape(u), 2.0),
            label="u^2",
        )

    @classmethod
    def identity(cls) -> "Nonlinearity":
        return cls(
            value=lambda u: np.array(u, dtype=float),
            derivative=lambda u: np.ones(np.shape(u)),
            second_derivative=lambda u: np.zeros(np.shape(u)),
            label="u",
        )
