"""Continuation of stationary branches through a stationary pair.

Near a stationary pair (x*, rho*) whose shifted Hessian is nonsingular, the
implicit function theorem gives a continuously differentiable branch
rho -> x(rho) with grad P(x(rho)) + rho * x(rho) = 0 and x(rho*) = x*. Its
tangent solves

    [hess P(x(rho)) + rho * I] x'(rho) = -x(rho)

Only the seed of a branch lies on the unit sphere; elsewhere |x(rho)| is
whatever the branch says it is.

`trace_branch` follows a branch with a classical 4 stage Runge-Kutta
predictor along the tangent, followed at each grid point by Newton
correction in x at fixed rho. A direction of the trace stops early, and the
trace is flagged as truncated, when the shifted Hessian becomes singular
(the branch folds) or the corrector fails. The traced dual function values
give a finite difference check of the closed form P_d'' from the dual
module.
"""

from dataclasses import dataclass
import logging
import math
from typing import List, Optional, Tuple

import numpy as np

import dual
import polyfun
from polyfun import InvalidInputError, NumericalError
import stationary

CORRECTOR_TOL = 1e-11
MAX_CORRECTOR_ITERS = 25
# Largest stationarity residual accepted at the seed before polishing it.
SEED_TOL = 1e-8
# Default window is rho* (1 -/+ WINDOW_FRACTION) -/+ WINDOW_PAD.
WINDOW_FRACTION = 1.0 / 16.0
WINDOW_PAD = 1e-3
# Default step is STEP_FRACTION * max(1, rho*).
STEP_FRACTION = 1e-2
# Grid points closer than this fraction of a step are the same point.
GRID_RTOL = 1e-9
# Corrections smaller than this never count as leaving the branch.
JUMP_FLOOR = 1e-6


@dataclass(frozen=True)
class BranchTraceConfig:
    rho_lo: float
    rho_hi: float
    step: float
    corrector_tol: float = CORRECTOR_TOL
    max_corrector_iters: int = MAX_CORRECTOR_ITERS
    seed_tol: float = SEED_TOL

    def __post_init__(self):
        if not self.rho_lo < self.rho_hi:
            raise InvalidInputError("rho_lo must be less than rho_hi")
        if not self.step > 0.0:
            raise InvalidInputError("step must be positive")
        if not self.corrector_tol > 0.0 or self.max_corrector_iters < 1:
            raise InvalidInputError("Invalid corrector settings")

    @classmethod
    def around(cls,
               rho: float,
               step: Optional[float] = None,
               window: Optional[Tuple[float, float]] = None,
               **kwargs) -> "BranchTraceConfig":
        """Return the default configuration for a seed with multiplier rho.

        Args:
            rho (float): Multiplier of the seed pair.
            step (float): Optional step; default STEP_FRACTION * max(1, rho).
            window (tuple): Optional (rho_lo, rho_hi); default is a window of
                relative half width WINDOW_FRACTION, padded by WINDOW_PAD.
            kwargs: Other BranchTraceConfig fields.
        """
        if step is None:
            step = STEP_FRACTION * max(1.0, abs(rho))
        if window is None:
            window = (rho * (1.0-WINDOW_FRACTION) - WINDOW_PAD,
                      rho * (1.0+WINDOW_FRACTION) + WINDOW_PAD)
        return cls(rho_lo=window[0], rho_hi=window[1], step=step, **kwargs)


@dataclass(frozen=True, eq=False)
class BranchPoint:
    rho: float
    x: np.ndarray
    tangent: np.ndarray
    residual_inf_norm: float


@dataclass(frozen=True, eq=False)
class BranchTrace:
    """A sampled branch, ordered by rho ascending.

    truncated_below and truncated_above hold the reason a direction stopped
    before reaching the end of the window, or None if it did not.
    """

    seed: stationary.StationaryPair
    points: Tuple[BranchPoint, ...]
    truncated_below: Optional[str] = None
    truncated_above: Optional[str] = None

    @property
    def truncated(self) -> bool:
        return self.truncated_below is not None or self.truncated_above is not None

    @property
    def rhos(self) -> np.ndarray:
        return np.array([point.rho for point in self.points])

    def index_of(self, rho: float) -> Optional[int]:
        """Index of the grid point at rho, or None if rho is not a grid point."""
        for index, point in enumerate(self.points):
            if abs(point.rho - rho) <= GRID_RTOL * max(1.0, abs(rho)):
                return index
        return None


def branch_tangent(problem, x: polyfun.ArrayLike, rho: float) -> np.ndarray:
    """Return x'(rho), the solution y of [hess P(x) + rho * I] y = -x.

    Raises:
        NumericalError: kind "singular-shifted-hessian" if the shifted Hessian
            is numerically singular.
    """
    point = polyfun.check_point(problem, x)
    return polyfun.solve_checked(dual.shifted_hessian(problem, point, rho),
                                 -point,
                                 kind="singular-shifted-hessian")


def stationarity_residual(problem, x: np.ndarray, rho: float) -> float:
    """Return the infinity norm of grad P(x) + rho * x."""
    return float(np.max(np.abs(problem.gradient(x) + rho*x)))


def correct(problem, x0: np.ndarray, rho: float, tol: float,
            max_iters: int) -> Tuple[np.ndarray, float]:
    """Newton correction of grad P(x) + rho * x = 0 in x alone, rho fixed.

    Returns:
        A tuple of the corrected point and its stationarity residual.

    Raises:
        NumericalError: kind "singular-shifted-hessian" if a Newton matrix is
            singular, kind "diverged" if there is no convergence.
    """
    x = np.array(x0, dtype=float)
    for iteration in range(max_iters + 1):
        residual = problem.gradient(x) + rho*x
        norm_inf = float(np.max(np.abs(residual)))
        if not math.isfinite(norm_inf):
            raise NumericalError("diverged", "Corrector iterate became non-finite")
        if norm_inf <= tol:
            return x, norm_inf
        if iteration == max_iters:
            break
        x = x + polyfun.solve_checked(dual.shifted_hessian(problem, x, rho),
                                      -residual,
                                      kind="singular-shifted-hessian")
    raise NumericalError(
        "diverged", "Corrector did not converge at rho={0:.17g} (residual {1:.3g})".format(
            rho, norm_inf))


def _rk4_predict(problem, x: np.ndarray, rho: float, h: float) -> np.ndarray:
    k1 = branch_tangent(problem, x, rho)
    k2 = branch_tangent(problem, x + 0.5*h*k1, rho + 0.5*h)
    k3 = branch_tangent(problem, x + 0.5*h*k2, rho + 0.5*h)
    k4 = branch_tangent(problem, x + h*k3, rho + h)
    return x + (h/6.0) * (k1 + 2.0*k2 + 2.0*k3 + k4)


def _grid(seed_rho: float, end: float, step: float) -> List[float]:
    """Grid from seed_rho (exclusive) to end (inclusive) in steps of step.

    The last step is shortened if needed to land on end.
    """
    span = abs(end - seed_rho)
    direction = 1.0 if end > seed_rho else -1.0
    count = int(math.floor(span/step + GRID_RTOL))
    grid = [seed_rho + direction*k*step for k in range(1, count + 1)]
    if span - count*step > GRID_RTOL * step:
        grid.append(end)
    return grid


def _trace_direction(problem, seed: BranchPoint, grid: List[float],
                     cfg: BranchTraceConfig) -> Tuple[List[BranchPoint], Optional[str]]:
    points: List[BranchPoint] = []
    current = seed
    for rho in grid:
        h = rho - current.rho
        try:
            predicted = _rk4_predict(problem, current.x, current.rho, h)
            x, residual = correct(problem, predicted, rho, cfg.corrector_tol,
                                  cfg.max_corrector_iters)
            # The corrector should only remove predictor drift; a large jump
            # means it landed on some other branch.
            move = float(np.max(np.abs(predicted - current.x)))
            if float(np.max(np.abs(x - predicted))) > max(move, JUMP_FLOOR):
                return points, "corrector left the branch at rho={0:.17g}".format(rho)
            tangent = branch_tangent(problem, x, rho)
        except NumericalError as e:
            return points, "{0} at rho={1:.17g}".format(str(e), rho)
        current = BranchPoint(rho, x, tangent, residual)
        points.append(current)
    return points, None


def trace_branch(problem,
                 pair: stationary.StationaryPair,
                 cfg: Optional[BranchTraceConfig] = None) -> BranchTrace:
    """Trace the branch through pair over [cfg.rho_lo, cfg.rho_hi].

    The seed is first polished by the corrector at its own rho. The trace
    then proceeds outward from the seed in both directions on a grid of
    spacing cfg.step (the last step in each direction may be shorter).

    Args:
        problem: The objective.
        pair (StationaryPair): The seed.
        cfg (BranchTraceConfig): Window and tolerances; default is
            `BranchTraceConfig.around(pair.rho)`.

    Returns:
        A BranchTrace. If a direction had to stop early, the trace is
        flagged as truncated with the reason.

    Raises:
        InvalidInputError: The seed residual exceeds cfg.seed_tol, or the
            seed rho is outside the window.
        NumericalError: The shifted Hessian is singular at the seed itself.
    """
    if cfg is None:
        cfg = BranchTraceConfig.around(pair.rho)
    seed_x = polyfun.check_point(problem, pair.x)
    if not cfg.rho_lo <= pair.rho <= cfg.rho_hi:
        raise InvalidInputError("Seed rho={0:.17g} is outside [{1:.17g}, {2:.17g}]".format(
            pair.rho, cfg.rho_lo, cfg.rho_hi))
    seed_residual = stationarity_residual(problem, seed_x, pair.rho)
    if not seed_residual <= cfg.seed_tol:
        raise InvalidInputError("Seed stationarity residual {0:.3g} exceeds {1:.3g}".format(
            seed_residual, cfg.seed_tol))

    x, residual = correct(problem, seed_x, pair.rho, cfg.corrector_tol, cfg.max_corrector_iters)
    seed = BranchPoint(pair.rho, x, branch_tangent(problem, x, pair.rho), residual)

    below, reason_below = _trace_direction(problem, seed, _grid(pair.rho, cfg.rho_lo, cfg.step),
                                           cfg)
    above, reason_above = _trace_direction(problem, seed, _grid(pair.rho, cfg.rho_hi, cfg.step),
                                           cfg)
    for reason in (reason_below, reason_above):
        if reason is not None:
            logging.warning("Branch from rho=%.17g truncated: %s", pair.rho, reason)
    return BranchTrace(seed=pair,
                       points=tuple(reversed(below)) + (seed, ) + tuple(above),
                       truncated_below=reason_below,
                       truncated_above=reason_above)


def fd_dual_second_derivative(problem, trace: BranchTrace, rho: float, stride: int = 1) -> float:
    """Second difference of P_d along the trace at grid point rho.

    Uses the grid points stride places either side of rho. The three point
    formula allows unequal spacing, for the shortened last step.

    Raises:
        InvalidInputError: rho is not a grid point with stride neighbors on
            both sides, or stride is not positive.
    """
    if stride < 1:
        raise InvalidInputError("stride must be positive")
    index = trace.index_of(rho)
    if index is None or index < stride or index + stride >= len(trace.points):
        raise InvalidInputError(
            "rho={0:.17g} has no grid neighbors {1} points away on both sides".format(
                rho, stride))
    left, mid, right = (trace.points[index - stride], trace.points[index],
                        trace.points[index + stride])
    f_left, f_mid, f_right = (dual.dual_value(problem, point.x, point.rho)
                              for point in (left, mid, right))
    h1 = mid.rho - left.rho
    h2 = right.rho - mid.rho
    return 2.0 * (f_left / (h1 * (h1+h2)) - f_mid / (h1*h2) + f_right / (h2 * (h1+h2)))


def extrapolated_dual_second_derivative(problem, trace: BranchTrace, rho: float) -> float:
    """Richardson extrapolation of the second difference of P_d at rho.

    Combines the differences over one and two grid steps, which cancels the
    leading truncation term. The two grid points on each side of rho must be
    equally spaced; use a trace whose window reaches at least two full steps
    past rho in each direction.

    Raises:
        InvalidInputError: rho lacks two grid neighbors on each side, or the
            spacing around rho is not uniform.
    """
    index = trace.index_of(rho)
    if index is None or index < 2 or index + 2 >= len(trace.points):
        raise InvalidInputError(
            "rho={0:.17g} needs two grid neighbors on both sides".format(rho))
    spacing = np.diff([point.rho for point in trace.points[index - 2:index + 3]])
    if np.max(np.abs(spacing - spacing[0])) > 1e3 * GRID_RTOL * abs(spacing[0]):
        raise InvalidInputError("Grid around rho={0:.17g} is not uniform".format(rho))
    near = fd_dual_second_derivative(problem, trace, rho)
    far = fd_dual_second_derivative(problem, trace, rho, stride=2)
    return (4.0*near - far) / 3.0
