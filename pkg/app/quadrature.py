"""
Gauss-Legendre quadrature: fixed rules, adaptive bisection and the graded
oracle for integrands with one integrable singularity
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional, Tuple

import numpy as np
from numpy.polynomial.legendre import leggauss

from app.config import settings
from app.exceptions import QuadratureError

logger = logging.getLogger(__name__)

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class QuadResult:
    """Value of an integral together with its bookkeeping"""
    value: complex
    error_estimate: float
    converged: bool
    intervals: int


@lru_cache(maxsize=64)
def gauss_legendre(order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Nodes and weights of the Gauss-Legendre rule on [-1, 1]"""
    if order < 1:
        raise ValueError(f"Gauss-Legendre order must be positive, got {order}")
    nodes, weights = leggauss(order)
    nodes.setflags(write=False)
    weights.setflags(write=False)
    return nodes, weights


def mapped_rule(lo: float, hi: float, order: int) -> Tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights mapped to [lo, hi]"""
    nodes, weights = gauss_legendre(order)
    half = 0.5 * (hi - lo)
    return 0.5 * (lo + hi) + half * nodes, half * weights


def evaluate(f: Callable, x: np.ndarray) -> np.ndarray:
    """Evaluate a vectorized callable, broadcasting scalar returns to x"""
    values = np.asarray(f(x))
    if values.shape != x.shape:
        values = np.broadcast_to(values, x.shape)
    return values


def gauss_rule(f: Callable, lo: float, hi: float, order: int) -> complex:
    """Single-panel Gauss-Legendre approximation of the integral of f"""
    x, w = mapped_rule(lo, hi, order)
    values = evaluate(f, x)
    if not np.all(np.isfinite(values)):
        raise QuadratureError(f"Non-finite integrand on [{lo!r}, {hi!r}]")
    return np.dot(w, values)


def adaptive_gauss(
    f: Callable,
    lo: float,
    hi: float,
    order: int,
    rtol: float = 0.0,
    atol: float = 0.0,
    max_intervals: int = 2000,
) -> QuadResult:
    """
    Adaptive Gauss-Legendre quadrature by bisection.

    A panel is accepted once its value agrees with the sum over its two
    halves to within rtol (relative to the panel) or atol (distributed by
    length over [lo, hi]). The panel order is deterministic, so identical
    inputs give bitwise identical results.
    """
    if hi == lo:
        return QuadResult(0.0, 0.0, True, 0)

    total_length = abs(hi - lo)
    stack = [(lo, hi, gauss_rule(f, lo, hi, order))]
    total = 0.0
    error = 0.0
    used = 0
    converged = True

    while stack:
        a, b, whole = stack.pop()
        mid = 0.5 * (a + b)
        left = gauss_rule(f, a, mid, order)
        right = gauss_rule(f, mid, b, order)
        refined = left + right
        diff = abs(refined - whole)
        used += 1

        tolerance = max(
            rtol * abs(refined),
            atol * abs(b - a) / total_length,
            64 * _EPS * abs(refined),
        )
        exhausted = used >= max_intervals
        if diff <= tolerance or exhausted or mid in (a, b):
            if exhausted and diff > tolerance:
                converged = False
            total += refined
            error += diff
        else:
            stack.append((mid, b, right))
            stack.append((a, mid, left))

    if not converged:
        logger.warning(
            f"Adaptive quadrature on [{lo}, {hi}] exhausted {max_intervals} intervals "
            f"(error estimate {error:.3e})"
        )
    return QuadResult(total, error, converged, used)


def _graded_integrand(f: Callable, anchor: float, span: float, exponent: int) -> Callable:
    """
    Integrand on u in [0, 1] after the substitution t = anchor + span * u**exponent.

    span is signed: negative spans grade toward a singular right endpoint.
    Nodes that round onto the anchor itself contribute zero.
    """
    def integrand(u: np.ndarray) -> np.ndarray:
        t = anchor + span * u ** exponent
        with np.errstate(divide="ignore", invalid="ignore"):
            values = evaluate(f, t)
        values = np.where(t == anchor, 0.0, values)
        return values * (exponent * abs(span) * u ** (exponent - 1))

    return integrand


def graded_gauss(
    f: Callable,
    anchor: float,
    span: float,
    order: int,
    subintervals: int,
    exponent: Optional[int] = None,
) -> complex:
    """
    Fixed-cost integral of f over the interval between anchor and
    anchor + span, on subintervals graded algebraically toward the anchor
    (mesh points anchor + span (k / m)**exponent).
    """
    exponent = exponent or settings.singular_grading_exponent
    integrand = _graded_integrand(f, anchor, span, exponent)
    breaks = np.linspace(0.0, 1.0, subintervals + 1)
    return sum(gauss_rule(integrand, p, q, order) for p, q in zip(breaks[:-1], breaks[1:]))


def singular_quad(
    f: Callable,
    lo: float,
    hi: float,
    singular_point: Optional[float] = None,
    tol: Optional[float] = None,
    order: Optional[int] = None,
    max_intervals: Optional[int] = None,
) -> QuadResult:
    """
    Integrate f over [lo, hi] allowing one integrable singularity.

    The interval is split at the singular point and each side is mapped by
    t = t* +/- L u^q (q = settings.singular_grading_exponent), which
    flattens algebraic and logarithmic endpoint singularities before
    adaptive bisection. When the subdivision budget runs out the best
    estimate is returned with converged=False.
    """
    tol = settings.singular_quad_tol if tol is None else tol
    order = order or settings.singular_quad_order
    max_intervals = max_intervals or settings.singular_quad_max_intervals
    exponent = settings.singular_grading_exponent

    if singular_point is None or not (lo <= singular_point <= hi):
        return adaptive_gauss(f, lo, hi, order, atol=tol, max_intervals=max_intervals)

    pieces = []
    if singular_point > lo:
        pieces.append(_graded_integrand(f, singular_point, lo - singular_point, exponent))
    if singular_point < hi:
        pieces.append(_graded_integrand(f, singular_point, hi - singular_point, exponent))

    value = 0.0
    error = 0.0
    intervals = 0
    converged = True
    for integrand in pieces:
        part = adaptive_gauss(
            integrand, 0.0, 1.0, order,
            atol=tol / len(pieces),
            max_intervals=max_intervals,
        )
        value += part.value
        error += part.error_estimate
        intervals += part.intervals
        converged = converged and part.converged

    return QuadResult(value, error, converged, intervals)
