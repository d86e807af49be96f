"""Stationary pairs of the ball-constrained concave minimization problem.

A stationary pair is a root (x, rho) of the system

    grad P(x) + rho * x = 0,  x.x = 1,  rho > 0

that is, a point on the unit sphere together with a positive multiplier for
the ball constraint. This module finds them by seeded multistart Newton,
deduplicates the results and orders them by multiplier.

Stationary set data
-------------------
: **pairs** : Stationary pairs, ordered by rho ascending, then
    lexicographically by x.
: **groups** : Partition of the pair indices into runs of pairs whose rho
    values agree within `tie_tol`. Group representative rho values are
    strictly increasing.
: **largest_index** : Index of the group with the largest rho. This group is
    the designee of both global optimality criteria studied by the certify
    and oracle modules.
: **nonpositive_rho_pairs** : Roots of the first two equations whose
    multiplier did not exceed the positivity floor. Informational only; they
    are not part of pairs.
: **failed_starts** : Number of Newton starts that failed to converge.

Multistart is a heuristic: it reports what it finds, with no claim that the
set of roots is complete. It does refuse to report root sets that look like
a continuum rather than finitely many isolated points.
"""

from dataclasses import dataclass
import logging
import math
from typing import List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from scipy.stats import norm
from scipy.stats import qmc

import polyfun
from polyfun import InvalidInputError, NumericalError

NEWTON_TOL = 1e-10
MAX_NEWTON_ITERS = 50
DEDUP_TOL = 1e-6
TIE_TOL = 1e-8
RHO_POSITIVITY_FLOOR = 1e-9
MAX_ROOTS = 64
MIN_START_COUNT = 64
STARTS_PER_DIMENSION = 32
# Smallest initial multiplier guess handed to Newton.
INITIAL_RHO = 0.1
# Allowed |x.x - 1| for points passed in as being on the sphere.
SPHERE_TOL = 1e-8
# Newton steps taken after newton_tol is met, while the residual keeps
# shrinking. Singularity tests downstream need rho to rounding level.
POLISH_STEPS = 3


class SuspectedContinuumError(polyfun.DualityError):
    """Provides error info when the roots do not look finitely many.

    Attributes:
        root_count (int): Number of distinct roots found before giving up.
    """
    def __init__(self, msg: str, root_count: int = 0):
        super().__init__(msg)
        self.root_count = root_count


@dataclass(frozen=True)
class MultistartConfig:
    """Knobs for `multistart_solve`.

    A start_count of None means max(64, 32 * n) for an n dimensional problem.
    """

    seed: int = 0
    start_count: Optional[int] = None
    newton_tol: float = NEWTON_TOL
    max_newton_iters: int = MAX_NEWTON_ITERS
    dedup_tol: float = DEDUP_TOL
    tie_tol: float = TIE_TOL
    rho_positivity_floor: float = RHO_POSITIVITY_FLOOR
    max_roots: int = MAX_ROOTS

    def __post_init__(self):
        if self.seed < 0:
            raise InvalidInputError("seed must not be negative")
        if self.start_count is not None and self.start_count < 1:
            raise InvalidInputError("start_count must be at least 1")
        if self.max_newton_iters < 1 or self.max_roots < 1:
            raise InvalidInputError("max_newton_iters and max_roots must be positive")
        for name in ("newton_tol", "dedup_tol", "tie_tol"):
            if not getattr(self, name) > 0.0:
                raise InvalidInputError("{0} must be positive".format(name))
        if not self.rho_positivity_floor >= 0.0:
            raise InvalidInputError("rho_positivity_floor must not be negative")

    def starts_for(self, dimension: int) -> int:
        if self.start_count is not None:
            return self.start_count
        return max(MIN_START_COUNT, STARTS_PER_DIMENSION * dimension)


class KktResidual(NamedTuple):
    """Residual of the stationarity system at a point (x, rho)."""

    grad_part: np.ndarray
    sphere_part: float

    def inf_norm(self) -> float:
        """Max of the gradient residual and |x.x - 1|."""
        grad_norm = float(np.max(np.abs(self.grad_part))) if self.grad_part.size else 0.0
        return max(grad_norm, abs(self.sphere_part))


@dataclass(frozen=True, eq=False)
class StationaryPair:
    x: np.ndarray
    rho: float
    residual_inf_norm: float
    iterations: int = 0


@dataclass(frozen=True, eq=False)
class StationarySet:
    pairs: Tuple[StationaryPair, ...]
    groups: Tuple[Tuple[int, ...], ...]
    largest_index: Optional[int]
    nonpositive_rho_pairs: Tuple[StationaryPair, ...] = ()
    failed_starts: int = 0

    def __len__(self) -> int:
        return len(self.pairs)

    @property
    def group_rhos(self) -> Tuple[float, ...]:
        """Representative (first) rho of each group."""
        return tuple(self.pairs[group[0]].rho for group in self.groups)

    @property
    def largest_group(self) -> Tuple[StationaryPair, ...]:
        if self.largest_index is None:
            return ()
        return tuple(self.pairs[i] for i in self.groups[self.largest_index])


def kkt_residual(problem, x: polyfun.ArrayLike, rho: float) -> KktResidual:
    """Evaluate grad P(x) + rho * x and x.x - 1.

    Raises:
        InvalidInputError: Dimension mismatch.
    """
    point = polyfun.check_point(problem, x)
    return KktResidual(problem.gradient(point) + rho * point, float(point @ point - 1.0))


def rho_from_x(problem, x: polyfun.ArrayLike) -> float:
    """Return the only multiplier candidate -x.grad P(x) for a unit vector x.

    Raises:
        InvalidInputError: x is not on the unit sphere within SPHERE_TOL.
    """
    point = polyfun.check_point(problem, x)
    if abs(point @ point - 1.0) > SPHERE_TOL:
        raise InvalidInputError("Point is not on the unit sphere (|x|^2 = {0:.17g})".format(
            float(point @ point)))
    return -float(point @ problem.gradient(point))


def bordered_jacobian(hessian: np.ndarray, rho: float, x: np.ndarray) -> np.ndarray:
    """Jacobian of (grad P(x) + rho * x, (x.x - 1) / 2) with respect to (x, rho)."""
    n = x.shape[0]
    jac = np.zeros((n + 1, n + 1))
    jac[:n, :n] = hessian + rho * np.eye(n)
    jac[:n, n] = x
    jac[n, :n] = x
    return jac


def newton_refine(problem,
                  x0: polyfun.ArrayLike,
                  rho0: float,
                  cfg: Optional[MultistartConfig] = None) -> StationaryPair:
    """Refine a guess (x0, rho0) to a stationary pair with Newton's method.

    The multiplier sign is not constrained here; callers decide what to do
    with roots that have rho <= 0.

    Args:
        problem: The objective.
        x0: Starting point.
        rho0 (float): Starting multiplier.
        cfg (MultistartConfig): Tolerance and iteration limit; defaults if
            not set.

    Returns:
        A StationaryPair whose residual_inf_norm is at most cfg.newton_tol.

    Raises:
        NumericalError: kind "singular" if a Newton Jacobian is singular,
            kind "diverged" if there is no convergence within
            cfg.max_newton_iters iterations.
    """
    if cfg is None:
        cfg = MultistartConfig()
    x = polyfun.check_point(problem, x0).copy()
    rho = float(rho0)
    n = problem.dimension
    for iteration in range(cfg.max_newton_iters + 1):
        residual = kkt_residual(problem, x, rho)
        norm_inf = residual.inf_norm()
        if not math.isfinite(norm_inf) or not math.isfinite(rho):
            raise NumericalError("diverged", "Newton iterate became non-finite")
        if norm_inf <= cfg.newton_tol:
            return _polish(problem, StationaryPair(x, rho, norm_inf, iteration))
        if iteration == cfg.max_newton_iters:
            break
        step = _newton_step(problem, x, rho, residual)
        x = x + step[:n]
        rho += float(step[n])

    raise NumericalError(
        "diverged", "Newton did not converge in {0} iterations (residual {1:.3g})".format(
            cfg.max_newton_iters, norm_inf))


def _newton_step(problem: polyfun.SmoothFunction, x: np.ndarray, rho: float,
                 residual: KktResidual) -> np.ndarray:
    jac = bordered_jacobian(problem.hessian(x), rho, x)
    rhs = -np.append(residual.grad_part, 0.5 * residual.sphere_part)
    return polyfun.solve_checked(jac, rhs, kind="singular")


def _polish(problem: polyfun.SmoothFunction, pair: StationaryPair) -> StationaryPair:
    """Take up to POLISH_STEPS more Newton steps past the tolerance.

    Stops at the first step that increases the residual or moves nothing
    beyond rounding, and returns the best iterate seen.
    """
    n = problem.dimension
    best = pair
    for _ in range(POLISH_STEPS):
        residual = kkt_residual(problem, best.x, best.rho)
        try:
            step = _newton_step(problem, best.x, best.rho, residual)
        except NumericalError:
            break
        x = best.x + step[:n]
        rho = best.rho + float(step[n])
        norm_inf = kkt_residual(problem, x, rho).inf_norm()
        if not math.isfinite(norm_inf) or norm_inf > best.residual_inf_norm:
            break
        best = StationaryPair(x, rho, norm_inf, best.iterations)
        scale = 1.0 + max(float(np.max(np.abs(x))), abs(rho))
        if float(np.max(np.abs(step))) <= 4.0 * np.finfo(float).eps * scale:
            break
    return best


def sphere_starts(dimension: int, count: int, seed: int = 0) -> np.ndarray:
    """Deterministic quasi-uniform points on the unit sphere.

    For n = 1, the sphere is just {-1, +1} and that is what is returned,
    regardless of count. Otherwise, ceil(count / 2) scrambled Halton points
    are mapped to the sphere through the normal distribution and returned
    together with their antipodes, so the result has an even number of rows.
    """
    if dimension == 1:
        return np.array([[-1.0], [1.0]])
    half = max(1, (count+1) // 2)
    engine = qmc.Halton(d=dimension, scramble=True, seed=seed)
    uniform = np.clip(engine.random(half), 1e-12, 1.0 - 1e-12)
    gauss = norm.ppf(uniform)
    lengths = np.linalg.norm(gauss, axis=1)
    degenerate = lengths == 0.0
    gauss[degenerate] = np.eye(dimension)[0]
    lengths[degenerate] = 1.0
    points = gauss / lengths[:, None]
    return np.vstack((points, -points))


def _deduplicate(pairs: Sequence[StationaryPair], tol: float) -> List[StationaryPair]:
    ordered = sorted(pairs, key=lambda p: (p.rho, tuple(p.x)))
    kept: List[StationaryPair] = []
    for pair in ordered:
        for other in kept:
            if abs(pair.rho - other.rho) <= tol and np.max(np.abs(pair.x - other.x)) <= tol:
                break
        else:
            kept.append(pair)
    return kept


def _group(pairs: Sequence[StationaryPair], tie_tol: float) -> Tuple[Tuple[int, ...], ...]:
    groups: List[List[int]] = []
    for index, pair in enumerate(pairs):
        if groups and pair.rho - pairs[groups[-1][0]].rho <= tie_tol:
            groups[-1].append(index)
        else:
            groups.append([index])
    return tuple(tuple(group) for group in groups)


def _is_isolated(problem, pair: StationaryPair) -> bool:
    jac = bordered_jacobian(problem.hessian(pair.x), pair.rho, pair.x)
    try:
        polyfun.solve_checked(jac, np.ones(jac.shape[0]))
    except NumericalError:
        return False
    return True


def multistart_solve(problem, cfg: Optional[MultistartConfig] = None) -> StationarySet:
    """Find the stationary pairs of problem by multistart Newton.

    Each start x on the sphere (see `sphere_starts`) is refined from
    (x, max(rho_from_x(x), 0.1)). Converged roots are deduplicated, those
    with rho above the positivity floor are sorted and grouped by rho, and
    the rest are kept aside as nonpositive_rho_pairs.

    Args:
        problem: The objective.
        cfg (MultistartConfig): Search knobs; defaults if not set.

    Returns:
        A StationarySet. It is identical for identical problem and cfg.

    Raises:
        SuspectedContinuumError: More than cfg.max_roots distinct roots were
            found, or, for n >= 2, a converged root is not isolated (its
            Newton Jacobian is singular).
    """
    if cfg is None:
        cfg = MultistartConfig()
    n = problem.dimension
    starts = sphere_starts(n, cfg.starts_for(n), cfg.seed)
    converged = []
    failed = 0
    for start in starts:
        rho0 = max(rho_from_x(problem, start), INITIAL_RHO)
        try:
            converged.append(newton_refine(problem, start, rho0, cfg))
        except NumericalError as e:
            failed += 1
            logging.debug("Newton start %s failed: %s", start, str(e))

    distinct = _deduplicate(converged, cfg.dedup_tol)
    logging.debug("Multistart: %d starts, %d converged, %d distinct roots", len(starts),
                  len(converged), len(distinct))
    if len(distinct) > cfg.max_roots:
        raise SuspectedContinuumError(
            "Found {0} distinct roots, more than max_roots={1}; the roots may form a "
            "continuum".format(len(distinct), cfg.max_roots), len(distinct))
    if n >= 2:
        for pair in distinct:
            if not _is_isolated(problem, pair):
                raise SuspectedContinuumError(
                    "Root x={0}, rho={1:.17g} is not isolated; the roots may form a "
                    "continuum".format(pair.x.tolist(), pair.rho), len(distinct))

    positive = [pair for pair in distinct if pair.rho > cfg.rho_positivity_floor]
    nonpositive = [pair for pair in distinct if pair.rho <= cfg.rho_positivity_floor]
    if nonpositive:
        logging.info("Ignoring %d root(s) with nonpositive multiplier", len(nonpositive))
    if failed:
        logging.debug("%d of %d Newton starts failed", failed, len(starts))
    groups = _group(positive, cfg.tie_tol)
    return StationarySet(pairs=tuple(positive),
                         groups=groups,
                         largest_index=len(groups) - 1 if groups else None,
                         nonpositive_rho_pairs=tuple(nonpositive),
                         failed_starts=failed)
