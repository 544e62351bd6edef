"""
Problem catalog: the two published examples and a manufactured problem
with a nontrivial discretization error
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Callable, Dict, List

import numpy as np

from app.assembly import ProblemSpec, apply_operator
from app.config import settings
from app.exceptions import ConfigurationError
from app.grid import Integrable1D
from app.kernel import Nonlinearity, SingularFactor, SmoothFactor
from app.quadrature import gauss_rule, graded_gauss
from app.solver import GuessPolicy

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class CatalogEntry:
    """
    A named problem with the Newton guess that reproduces its published
    iteration pattern. exact_discrete marks problems whose reference cell
    means solve the discrete system exactly.
    """
    id: str
    description: str
    build: Callable[[], ProblemSpec]
    guess: GuessPolicy
    guess_scale: float
    exact_discrete: bool


def _example1(frequency: float) -> ProblemSpec:
    return ProblemSpec(
        a=0.0,
        b=1.0,
        H=SingularFactor.log_distance(),
        L=SmoothFactor.one(),
        N=Nonlinearity.sine(frequency),
        y=Integrable1D.constant(-1.0, 0.0, 1.0, label="y = -1"),
        phi_ref=Integrable1D.constant(1.0, 0.0, 1.0, label="phi = 1"),
        label=f"example1 N=sin({frequency:g} pi u)",
    )


def _example2() -> ProblemSpec:
    return ProblemSpec(
        a=0.0,
        b=1.0,
        H=SingularFactor.log_distance(),
        L=SmoothFactor.one(),
        N=Nonlinearity.sine(1),
        y=Integrable1D.piecewise_constant([0.0, 0.5, 1.0], [-1.0, -2.0], label="y = -1 | -2"),
        phi_ref=Integrable1D.piecewise_constant([0.0, 0.5, 1.0], [1.0, 2.0], label="phi = 1 | 2"),
        label="example2",
    )


def _oracle_mean(f: Callable, a: float, b: float) -> Callable[[float, float], float]:
    """
    Cell means of a function whose derivative is unbounded only at a and b:
    graded Gauss-Legendre on cells touching the ends, one fixed rule elsewhere.
    """
    order = settings.cell_mean_order
    pieces = settings.graded_subintervals

    def mean(lo: float, hi: float) -> float:
        at_left, at_right = lo <= a, hi >= b
        if at_left and at_right:
            mid = 0.5 * (lo + hi)
            total = graded_gauss(f, lo, mid - lo, order, pieces) + graded_gauss(f, hi, mid - hi, order, pieces)
        elif at_left:
            total = graded_gauss(f, lo, hi - lo, order, pieces)
        elif at_right:
            total = graded_gauss(f, hi, lo - hi, order, pieces)
        else:
            total = gauss_rule(f, lo, hi, order)
        return total / (hi - lo)

    return mean


def _manufactured() -> ProblemSpec:
    """phi(s) = s, N(u) = u^2, L = 1, H = -log|s - t|, y := K(phi) - phi"""
    phi = Integrable1D(
        func=lambda s: np.asarray(s, dtype=float),
        a=0.0,
        b=1.0,
        mean=lambda lo, hi: 0.5 * (lo + hi),
        label="phi = s",
    )
    draft = ProblemSpec(
        a=0.0,
        b=1.0,
        H=SingularFactor.log_distance(),
        L=SmoothFactor.one(),
        N=Nonlinearity.square(),
        y=Integrable1D.constant(0.0, 0.0, 1.0),
        phi_ref=phi,
        label="manufactured",
    )

    def rhs(s):
        s = np.asarray(s, dtype=float)
        return (apply_operator(draft, phi, s.ravel()) - s.ravel()).reshape(s.shape)

    y = Integrable1D(func=rhs, a=0.0, b=1.0, mean=_oracle_mean(rhs, 0.0, 1.0), label="y = K(phi) - phi")
    return dataclasses.replace(draft, y=y)


CATALOG: Dict[str, CatalogEntry] = {
    entry.id: entry
    for entry in (
        CatalogEntry(
            id="example1-sinpi",
            description="[0,1], H=-log|s-t|, L=1, N=sin(pi u), y=-1, phi=1",
            build=lambda: _example1(1),
            guess=GuessPolicy.REFERENCE,
            guess_scale=0.65,
            exact_discrete=True,
        ),
        CatalogEntry(
            id="example1-sin2pi",
            description="[0,1], H=-log|s-t|, L=1, N=sin(2 pi u), y=-1, phi=1",
            build=lambda: _example1(2),
            guess=GuessPolicy.REFERENCE,
            guess_scale=0.89,
            exact_discrete=True,
        ),
        CatalogEntry(
            id="example2",
            description="[0,1], H=-log|s-t|, L=1, N=sin(pi u), phi=1|2 and y=-1|-2 split at 0.5",
            build=_example2,
            guess=GuessPolicy.REFERENCE,
            guess_scale=0.95,
            exact_discrete=True,
        ),
        CatalogEntry(
            id="manufactured",
            description="[0,1], H=-log|s-t|, L=1, N=u^2, phi=s, y=K(phi)-phi by the quadrature oracle",
            build=_manufactured,
            guess=GuessPolicy.REFERENCE,
            guess_scale=1.0,
            exact_discrete=False,
        ),
    )
}


def get_entry(problem_id: str) -> CatalogEntry:
    try:
        return CATALOG[problem_id]
    except KeyError:
        raise ConfigurationError(
            f"Unknown problem '{problem_id}'; choose one of {', '.join(sorted(CATALOG))}"
        ) from None


def problem_ids() -> List[str]:
    return sorted(CATALOG)
