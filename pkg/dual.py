"""Canonical dual function along stationary branches.

Along a branch rho -> x(rho) of solutions of grad P(x) + rho * x = 0, the
dual function is

    P_d(rho) = P(x(rho)) + (rho / 2) * x.x - rho / 2

and its derivatives have closed forms that only need the data of the problem:

    P_d'(rho)  = (x.x - 1) / 2
    P_d''(rho) = x.x'(rho) = -x.[hess P(x) + rho * I]^-1 x

These functions evaluate the same expressions at any (x, rho), which is how
they are tested, but they only mean something at points of a branch.

Dual evaluation data
--------------------
: **rho** : The multiplier.
: **value** : P_d(rho).
: **first_derivative** : P_d'(rho). Zero at stationary pairs.
: **second_derivative** : P_d''(rho), or None if the shifted Hessian
    hess P(x) + rho * I is numerically singular. Never made up.
: **det_shifted_hessian** : det(hess P(x) + rho * I).
: **inverse_form** : x.[hess P(x) + rho * I]^-1 x, or None if singular. The
    curvature condition P_d'' > 0 is the same as inverse_form < 0.
: **curvature_positive** : True if and only if second_derivative > 0.

Note that positive dual curvature at every stationary pair does NOT imply
that the pair with the largest multiplier is a global minimizer. The oracle
module demonstrates this on a one dimensional quartic.
"""

from dataclasses import dataclass
import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

import polyfun
from polyfun import InvalidInputError, NumericalError
import stationary

# |x.x - 1| below this times n counts as on the sphere.
SPHERE_ROUNDING = 8.0 * float(np.finfo(float).eps)


@dataclass(frozen=True)
class DualEvaluation:
    rho: float
    value: float
    first_derivative: float
    second_derivative: Optional[float]
    det_shifted_hessian: float
    inverse_form: Optional[float]

    @property
    def curvature_positive(self) -> bool:
        return self.second_derivative is not None and self.second_derivative > 0.0


@dataclass(frozen=True)
class PairHypotheses:
    """Dual-curvature criterion hypotheses at one stationary pair.

    scalar_condition is only set for one dimensional problems, where the
    curvature condition reduces to P''(x) + rho < 0.
    """

    index: int
    pair: stationary.StationaryPair
    evaluation: DualEvaluation
    det_nonzero: bool
    curvature_positive: bool
    scalar_condition: Optional[float] = None
    failure: Optional[str] = None


@dataclass(frozen=True)
class Theorem32Report:
    pairs: Tuple[PairHypotheses, ...]
    hold_for_all: bool
    designee_indices: Tuple[int, ...]


def shifted_hessian(problem, x: polyfun.ArrayLike, rho: float) -> np.ndarray:
    """Return hess P(x) + rho * I."""
    point = polyfun.check_point(problem, x)
    return problem.hessian(point) + rho * np.eye(problem.dimension)


def _sphere_excess(point: np.ndarray) -> float:
    """Return x.x - 1, with rounding-level misses of the unit sphere set to 0."""
    excess = float(point @ point) - 1.0
    if abs(excess) <= SPHERE_ROUNDING * point.size:
        return 0.0
    return excess


def dual_value(problem, x: polyfun.ArrayLike, rho: float) -> float:
    """Return P(x) + (rho / 2) * x.x - rho / 2.

    Computed as P(x) + (rho / 2) * (x.x - 1), so that it is exactly P(x) for
    unit vectors, including those that miss x.x = 1 only by rounding.

    Raises:
        InvalidInputError: Dimension mismatch.
    """
    point = polyfun.check_point(problem, x)
    return problem.value(point) + 0.5 * rho * _sphere_excess(point)


def dual_first_derivative(x: polyfun.ArrayLike) -> float:
    """Return (x.x - 1) / 2."""
    point = np.atleast_1d(np.asarray(x, dtype=float))
    return 0.5 * _sphere_excess(point)


def shifted_solve(problem, x: polyfun.ArrayLike, rho: float) -> np.ndarray:
    """Return y solving [hess P(x) + rho * I] y = x.

    Raises:
        NumericalError: kind "singular-shifted-hessian" if the shifted Hessian
            is numerically singular.
    """
    point = polyfun.check_point(problem, x)
    return polyfun.solve_checked(shifted_hessian(problem, point, rho),
                                 point,
                                 kind="singular-shifted-hessian")


def inverse_form(problem, x: polyfun.ArrayLike, rho: float) -> float:
    """Return x.[hess P(x) + rho * I]^-1 x.

    Raises:
        NumericalError: kind "singular-shifted-hessian" if the shifted Hessian
            is numerically singular.
    """
    point = polyfun.check_point(problem, x)
    return float(point @ shifted_solve(problem, point, rho))


def dual_second_derivative(problem, x: polyfun.ArrayLike, rho: float) -> float:
    """Return -x.[hess P(x) + rho * I]^-1 x, the second derivative of P_d.

    Raises:
        NumericalError: kind "singular-shifted-hessian" if the shifted Hessian
            is numerically singular, which is exactly the failure of the
            determinant hypothesis of the dual-curvature criterion.
    """
    return -inverse_form(problem, x, rho)


def evaluate_dual(problem, x: polyfun.ArrayLike, rho: float) -> DualEvaluation:
    """Evaluate P_d and its derivatives at (x, rho).

    A singular shifted Hessian is not an error here; it is reported by
    second_derivative and inverse_form being None.
    """
    point = polyfun.check_point(problem, x)
    try:
        form = inverse_form(problem, point, rho)
    except NumericalError as e:
        logging.debug("No dual curvature at rho=%.17g: %s", rho, str(e))
        form = None
    return DualEvaluation(rho=float(rho),
                          value=dual_value(problem, point, rho),
                          first_derivative=dual_first_derivative(point),
                          second_derivative=None if form is None else -form,
                          det_shifted_hessian=float(
                              scipy.linalg.det(shifted_hessian(problem, point, rho))),
                          inverse_form=form)


def theorem32_hypotheses(problem, stationary_set: stationary.StationarySet) -> Theorem32Report:
    """Check the dual-curvature criterion hypotheses at every stationary pair.

    The hypotheses are that the shifted Hessian hess P(x_i) + rho_i * I is
    nonsingular and P_d''(rho_i) > 0 for every pair i. The criterion claims
    that the pairs with the largest multiplier are then global minimizers;
    this report only says whether the hypotheses hold.

    Raises:
        InvalidInputError: The stationary set is empty.
    """
    if not stationary_set.pairs:
        raise InvalidInputError("Stationary set is empty")

    entries = []
    for index, pair in enumerate(stationary_set.pairs):
        evaluation = evaluate_dual(problem, pair.x, pair.rho)
        det_nonzero = evaluation.second_derivative is not None
        failure = None
        if not det_nonzero:
            failure = "shifted Hessian is singular"
        elif not evaluation.curvature_positive:
            failure = "dual curvature is not positive"
        scalar = None
        if problem.dimension == 1:
            scalar = float(shifted_hessian(problem, pair.x, pair.rho)[0, 0])
        entries.append(
            PairHypotheses(index=index,
                           pair=pair,
                           evaluation=evaluation,
                           det_nonzero=det_nonzero,
                           curvature_positive=evaluation.curvature_positive,
                           scalar_condition=scalar,
                           failure=failure))

    designee = ()
    if stationary_set.largest_index is not None:
        designee = stationary_set.groups[stationary_set.largest_index]
    return Theorem32Report(pairs=tuple(entries),
                           hold_for_all=all(entry.failure is None for entry in entries),
                           designee_indices=designee)
