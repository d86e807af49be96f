"""Brute force global minimization over the unit ball, for small dimensions.

`global_min_grid` evaluates P on every point of an axis aligned grid of
[-1, 1]^n that lies in the ball, and on an angular grid of the unit sphere.
A concave P attains its minimum over the ball on the sphere, but both grids
are searched anyway, so that objectives that are not actually concave still
get a correct answer up to grid resolution.

The result is independent ground truth for checking which stationary pairs,
if any, are global minimizers. `compare_candidates` does that check for the
pairs with the largest multiplier, which is where both global optimality
criteria point, and produces a refutation record when they are not globally
minimal.
"""

from dataclasses import dataclass
import logging
import math
from typing import Optional, Tuple

import numpy as np

import polyfun
from polyfun import InvalidInputError
import stationary

# Default points per axis by dimension.
DEFAULT_POINTS = {1: 20001, 2: 1501, 3: 201}
DIMENSION_LIMIT = 3
VALUE_TOL = 1e-3
# Slack on |x| <= 1 for grid points, for rounding in the axis values.
BALL_SLACK = 1e-12


@dataclass(frozen=True)
class GridSpec:
    """Grid for `global_min_grid`.

    A points_per_axis of None means the DEFAULT_POINTS entry for the
    problem dimension.
    """

    points_per_axis: Optional[int] = None
    dimension_limit: int = DIMENSION_LIMIT

    def __post_init__(self):
        if self.points_per_axis is not None and self.points_per_axis < 3:
            raise InvalidInputError("points_per_axis must be at least 3")
        if self.dimension_limit < 1:
            raise InvalidInputError("dimension_limit must be positive")

    def points_for(self, dimension: int) -> int:
        if self.points_per_axis is not None:
            return self.points_per_axis
        return DEFAULT_POINTS.get(dimension, DEFAULT_POINTS[DIMENSION_LIMIT])


@dataclass(frozen=True, eq=False)
class OracleResult:
    argmin: np.ndarray
    min_value: float
    grid_resolution: float
    points_evaluated: int = 0


@dataclass(frozen=True, eq=False)
class PairValue:
    index: int
    pair: stationary.StationaryPair
    value: float


@dataclass(frozen=True, eq=False)
class Refutation:
    """The designee of the largest multiplier is not a global minimizer.

    gap is designee_value - oracle_value, and exceeds the value tolerance.
    """

    designee_index: int
    designee_x: np.ndarray
    designee_rho: float
    designee_value: float
    oracle_argmin: np.ndarray
    oracle_value: float
    gap: float


@dataclass(frozen=True, eq=False)
class CandidateComparison:
    pair_values: Tuple[PairValue, ...]
    best_index: int
    designee_indices: Tuple[int, ...]
    designee_matches: bool
    oracle_consistent: bool
    value_tol: float
    refutation: Optional[Refutation] = None


def sphere_grid(dimension: int, points_per_axis: int) -> np.ndarray:
    """Angular grid of the unit sphere matching an axis grid resolution.

    For n = 1 the sphere is {-1, +1}. For n = 2 there are 4 (p - 1) equally
    spaced angles, and for n = 3 a polar grid of 2 (p - 1) + 1 polar angles
    by 4 (p - 1) azimuths, where p is points_per_axis. Doubling the number of
    axis intervals makes each of these grids a superset of the previous one.
    """
    intervals = points_per_axis - 1
    if dimension == 1:
        return np.array([[-1.0], [1.0]])
    count = 4 * intervals
    azimuth = np.arange(count) * (2.0 * math.pi) / count
    if dimension == 2:
        return np.column_stack((np.cos(azimuth), np.sin(azimuth)))
    if dimension == 3:
        polar = np.linspace(0.0, math.pi, 2*intervals + 1)
        polar, azimuth = np.meshgrid(polar, azimuth, indexing="ij")
        polar = polar.ravel()
        azimuth = azimuth.ravel()
        return np.column_stack((np.sin(polar) * np.cos(azimuth), np.sin(polar) * np.sin(azimuth),
                                np.cos(polar)))
    raise InvalidInputError("No sphere grid for dimension {0}".format(dimension))


def _best(points: np.ndarray, values: np.ndarray) -> Tuple[float, np.ndarray]:
    """Smallest value and the lexicographically smallest point attaining it."""
    low = float(np.min(values))
    ties = points[values == low]
    order = np.lexsort(ties.T[::-1])
    return low, ties[order[0]]


def _better(candidate: Tuple[float, np.ndarray], incumbent: Optional[Tuple[float,
                                                                            np.ndarray]]) -> bool:
    if incumbent is None:
        return True
    if candidate[0] != incumbent[0]:
        return candidate[0] < incumbent[0]
    return tuple(candidate[1]) < tuple(incumbent[1])


def global_min_grid(problem, grid: Optional[GridSpec] = None) -> OracleResult:
    """Find the minimum of P over the closed unit ball by exhaustive search.

    Ties between equal values go to the lexicographically smallest point.

    Args:
        problem: The objective.
        grid (GridSpec): Grid resolution and dimension limit.

    Returns:
        An OracleResult, with min_value recomputed at argmin by
        `polyfun.evaluate`.

    Raises:
        InvalidInputError: The problem dimension exceeds grid.dimension_limit.
    """
    if grid is None:
        grid = GridSpec()
    n = problem.dimension
    if n > grid.dimension_limit or n > DIMENSION_LIMIT:
        raise InvalidInputError(
            "Grid search is limited to dimension {0}, problem has dimension {1}; use multistart "
            "with the convexification certificate instead".format(
                min(grid.dimension_limit, DIMENSION_LIMIT), n))

    ppa = grid.points_for(n)
    axis = np.linspace(-1.0, 1.0, ppa)
    shape = (ppa, ) * n
    total = ppa**n
    best = None
    evaluated = 0
    for start in range(0, total, polyfun.EVAL_CHUNK):
        flat = np.arange(start, min(start + polyfun.EVAL_CHUNK, total))
        points = axis[np.stack(np.unravel_index(flat, shape), axis=1)]
        points = points[np.einsum("ij,ij->i", points, points) <= 1.0 + BALL_SLACK]
        if not points.shape[0]:
            continue
        evaluated += points.shape[0]
        candidate = _best(points, polyfun.value_stack(problem, points))
        if _better(candidate, best):
            best = candidate

    sphere = sphere_grid(n, ppa)
    for start in range(0, sphere.shape[0], polyfun.EVAL_CHUNK):
        points = sphere[start:start + polyfun.EVAL_CHUNK]
        evaluated += points.shape[0]
        candidate = _best(points, polyfun.value_stack(problem, points))
        if _better(candidate, best):
            best = candidate

    argmin = best[1].copy()
    logging.debug("Grid search over %d points: min %.17g at %s", evaluated, best[0], argmin)
    return OracleResult(argmin=argmin,
                        min_value=polyfun.evaluate(problem, argmin),
                        grid_resolution=2.0 / (ppa-1),
                        points_evaluated=evaluated)


def compare_candidates(problem,
                       stationary_set: stationary.StationarySet,
                       oracle_result: OracleResult,
                       value_tol: float = VALUE_TOL) -> CandidateComparison:
    """Compare the stationary pairs with the oracle minimum.

    The designee is the group of pairs with the largest multiplier; its value
    is the smallest P value in the group. If it is above the oracle minimum
    by more than value_tol, the comparison carries a refutation record.

    Raises:
        InvalidInputError: The stationary set is empty.
    """
    if not stationary_set.pairs:
        raise InvalidInputError("Stationary set is empty")
    pair_values = tuple(
        PairValue(index, pair, polyfun.evaluate(problem, pair.x))
        for index, pair in enumerate(stationary_set.pairs))
    values = [entry.value for entry in pair_values]
    best_index = int(np.argmin(values))
    designee = stationary_set.groups[stationary_set.largest_index]
    designee_index = min(designee, key=lambda i: values[i])
    designee_value = values[designee_index]
    matches = designee_value <= oracle_result.min_value + value_tol
    consistent = values[best_index] >= oracle_result.min_value - value_tol
    if not consistent:
        logging.warning("Stationary pair %d is below the grid minimum by more than %.3g",
                        best_index, value_tol)

    refutation = None
    if not matches:
        pair = stationary_set.pairs[designee_index]
        refutation = Refutation(designee_index=designee_index,
                                designee_x=pair.x,
                                designee_rho=pair.rho,
                                designee_value=designee_value,
                                oracle_argmin=oracle_result.argmin,
                                oracle_value=oracle_result.min_value,
                                gap=designee_value - oracle_result.min_value)
    return CandidateComparison(pair_values=pair_values,
                               best_index=best_index,
                               designee_indices=designee,
                               designee_matches=matches,
                               oracle_consistent=consistent,
                               value_tol=value_tol,
                               refutation=refutation)
