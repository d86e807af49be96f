"""Global optimality certificates for ball-constrained concave minimization.

A stationary pair (x, rho) is globally minimal over the unit ball D if the
convexified function P(u) + (rho / 2) * u.u is convex on D, that is, if the
shifted Hessian hess P(u) + rho * I is positive definite at every u in D. In
relaxed form, positive semidefiniteness on a slightly larger ball D_r with
r > 1 suffices, for any on-sphere stationary x with rho >= 0.

Except when P has a constant Hessian (degree 2 or less), these conditions
are checked by evaluating the shifted Hessian at seeded quasi-random points
of the ball, which can refute a certificate with a concrete witness point
but never prove one. The verdicts say which of these happened:

: **certified_exact** : Constant Hessian; the condition holds everywhere.
: **certified_sampled** : The condition holds at every sample, with
    margin_floor to spare.
: **refuted** : The condition fails at witness_point. This is conclusive.
    In relaxed mode an eigenvalue that is negative only at rounding level
    (EXACT_RTOL relative) does not refute.
: **inconclusive** : Neither of the above; the extreme eigenvalue found is
    within margin_floor of the boundary.

Certificate result data
-----------------------
: **verdict** : One of the above.
: **mode** : "strict" or "relaxed".
: **rho** : Shift at which the check was done; None for concavity checks.
: **min_eigenvalue_found** : Smallest eigenvalue of the checked matrices
    over all samples.
: **max_eigenvalue_found** : Largest eigenvalue over all samples.
: **witness_point** : Sample at which the extreme eigenvalue that decides the
    verdict was attained. Ties go to the lowest sample index.
: **margin** : Slack of the checked condition at the witness. Positive if
    the condition holds there.
: **exactness_reason** : Why the verdict is exact, or None if sampled.
: **samples_evaluated** : Number of points at which the Hessian was
    evaluated.
"""

from dataclasses import dataclass
import logging
from typing import Optional, Tuple

import numpy as np
import scipy.linalg
from scipy.stats import norm
from scipy.stats import qmc

import polyfun
from polyfun import InvalidInputError
import stationary

CERTIFIED_EXACT = "certified_exact"
CERTIFIED_SAMPLED = "certified_sampled"
REFUTED = "refuted"
INCONCLUSIVE = "inconclusive"
CERTIFIED_VERDICTS = (CERTIFIED_EXACT, CERTIFIED_SAMPLED)

STRICT = "strict"
RELAXED = "relaxed"
MODES = (STRICT, RELAXED)

MARGIN_FLOOR = 1e-8
SAMPLES_PER_DIMENSION = 4096
RELAXED_RADIUS = 1.0 + 1.0 / 16.0
# Relative tolerance, against the matrix norm, for deciding the sign of an
# eigenvalue of a constant Hessian.
EXACT_RTOL = 1e-12
ASYMMETRY_TOL = 1e-12
# Allowed stationarity residual of a relaxed certificate query.
QUERY_TOL = 1e-8


@dataclass(frozen=True)
class BallSampling:
    """Sample points for the certificate checks.

    A sample_count of None means SAMPLES_PER_DIMENSION * n interior points
    for an n dimensional problem.
    """

    radius: float = 1.0
    sample_count: Optional[int] = None
    seed: int = 0
    include_boundary: bool = True

    def __post_init__(self):
        if not self.radius >= 1.0:
            raise InvalidInputError("Sampling radius must be at least 1")
        if self.sample_count is not None and self.sample_count < 1:
            raise InvalidInputError("sample_count must be at least 1")
        if self.seed < 0:
            raise InvalidInputError("seed must not be negative")

    def count_for(self, dimension: int) -> int:
        if self.sample_count is not None:
            return self.sample_count
        return SAMPLES_PER_DIMENSION * dimension


@dataclass(frozen=True, eq=False)
class CertificateQuery:
    x_bar: np.ndarray
    rho_bar: float
    mode: str = RELAXED

    def __post_init__(self):
        if self.mode not in MODES:
            raise InvalidInputError("Unknown certificate mode {0!r}".format(self.mode))
        if not self.rho_bar >= 0.0:
            raise InvalidInputError("rho_bar must not be negative")
        x_bar = np.atleast_1d(np.asarray(self.x_bar, dtype=float))
        if abs(float(x_bar @ x_bar) - 1.0) > stationary.SPHERE_TOL:
            raise InvalidInputError("x_bar is not a unit vector")


@dataclass(frozen=True, eq=False)
class CertificateResult:
    verdict: str
    mode: str
    rho: Optional[float]
    min_eigenvalue_found: float
    max_eigenvalue_found: float
    witness_point: np.ndarray
    margin: float
    exactness_reason: Optional[str] = None
    samples_evaluated: int = 0

    @property
    def certified(self) -> bool:
        return self.verdict in CERTIFIED_VERDICTS


@dataclass(frozen=True)
class MinimalityChain:
    """Worst slacks of P(x) + rho/2 <= P(u) + (rho/2) u.u <= P(u) + rho/2 over D.

    The first inequality is minimality of the convexified function at the
    designee x; the second holds for any u in D when rho >= 0. Both slacks
    are nonnegative, up to tol, when the designee is a global minimizer.
    """

    convexified_slack: float
    shift_slack: float
    tol: float
    samples_evaluated: int

    @property
    def holds(self) -> bool:
        return self.convexified_slack >= -self.tol and self.shift_slack >= -self.tol


@dataclass(frozen=True, eq=False)
class Theorem31Verdict:
    """Convexification certificate at a designee, and what it designates.

    designated is empty unless the certificate was certified.
    """

    certificate: CertificateResult
    designee: Tuple[stationary.StationaryPair, ...]
    designated: Tuple[stationary.StationaryPair, ...]
    designated_value: Optional[float]
    chain: MinimalityChain
    query: Optional[CertificateQuery] = None


def _check_symmetric(matrix) -> np.ndarray:
    matrix = np.asarray(matrix, dtype=float)
    if matrix.ndim != 2 or matrix.shape[0] != matrix.shape[1]:
        raise InvalidInputError("Expected a square matrix, got shape {0}".format(matrix.shape))
    scale = max(1.0, float(np.linalg.norm(matrix, np.inf)))
    if np.max(np.abs(matrix - matrix.T), initial=0.0) > ASYMMETRY_TOL * scale:
        raise InvalidInputError("Matrix is not symmetric")
    return matrix


def min_eig_sym(matrix) -> float:
    """Return the smallest eigenvalue of a symmetric matrix.

    Raises:
        InvalidInputError: The matrix is not square, or not symmetric to
            within ASYMMETRY_TOL relative to its norm.
    """
    return float(scipy.linalg.eigvalsh(_check_symmetric(matrix))[0])


def max_eig_sym(matrix) -> float:
    """Return the largest eigenvalue of a symmetric matrix.

    Raises:
        InvalidInputError: As for `min_eig_sym`.
    """
    return float(scipy.linalg.eigvalsh(_check_symmetric(matrix))[-1])


def ball_samples(dimension: int, sampling: BallSampling) -> np.ndarray:
    """Seeded quasi-random points of the closed ball of radius sampling.radius.

    The first row is the origin. Interior points come from a scrambled
    Halton sequence, with one extra coordinate for the radius in n >= 2 so
    that points are uniform in volume. If include_boundary is set, the
    multistart start points scaled to the sampling radius are appended, so
    that every point where a stationary pair search starts is also checked.
    """
    radius = sampling.radius
    count = sampling.count_for(dimension)
    if dimension == 1:
        engine = qmc.Halton(d=1, scramble=True, seed=sampling.seed)
        interior = radius * (2.0*engine.random(count) - 1.0)
    else:
        engine = qmc.Halton(d=dimension + 1, scramble=True, seed=sampling.seed)
        uniform = np.clip(engine.random(count), 1e-12, 1.0 - 1e-12)
        gauss = norm.ppf(uniform[:, :dimension])
        directions = gauss / np.linalg.norm(gauss, axis=1)[:, None]
        interior = directions * (radius * uniform[:, dimension]**(1.0/dimension))[:, None]
    parts = [np.zeros((1, dimension)), interior]
    if sampling.include_boundary:
        starts = stationary.MultistartConfig(seed=sampling.seed).starts_for(dimension)
        parts.append(radius * stationary.sphere_starts(dimension, starts, sampling.seed))
    return np.vstack(parts)


def _spectra(problem, points: np.ndarray, shift: float) -> Tuple[np.ndarray, np.ndarray]:
    lowest = np.empty(points.shape[0])
    highest = np.empty(points.shape[0])
    identity = np.eye(problem.dimension)
    for start in range(0, points.shape[0], polyfun.EVAL_CHUNK):
        chunk = points[start:start + polyfun.EVAL_CHUNK]
        eigs = np.linalg.eigvalsh(polyfun.hessian_stack(problem, chunk) + shift*identity)
        lowest[start:start + chunk.shape[0]] = eigs[:, 0]
        highest[start:start + chunk.shape[0]] = eigs[:, -1]
    return lowest, highest


def _has_constant_hessian(problem) -> bool:
    degree = getattr(problem, "degree", None)
    return degree is not None and degree <= 2


def check_convexification(problem,
                          rho: float,
                          sampling: Optional[BallSampling] = None,
                          mode: str = STRICT,
                          margin_floor: float = MARGIN_FLOOR) -> CertificateResult:
    """Check hess P(u) + rho * I for positive (semi)definiteness on the ball.

    Strict mode asks for positive definiteness. Relaxed mode asks for
    positive semidefiniteness, normally on a ball of radius greater than 1.

    Args:
        problem: The objective.
        rho (float): The shift.
        sampling (BallSampling): Where to look; default is the unit ball with
            default sample count.
        mode (str): STRICT or RELAXED.
        margin_floor (float): Eigenvalues within this of zero are too close to
            call for sampled verdicts.

    Returns:
        A CertificateResult; witness_point is where the smallest eigenvalue
        was found.

    Raises:
        InvalidInputError: Unknown mode or non-finite rho.
    """
    if mode not in MODES:
        raise InvalidInputError("Unknown certificate mode {0!r}".format(mode))
    if not np.isfinite(rho):
        raise InvalidInputError("rho must be finite")
    if sampling is None:
        sampling = BallSampling()
    n = problem.dimension

    if _has_constant_hessian(problem):
        origin = np.zeros(n)
        shifted = problem.hessian(origin) + rho * np.eye(n)
        eigs = scipy.linalg.eigvalsh(shifted)
        lowest = float(eigs[0])
        tol = EXACT_RTOL * max(1.0, float(np.linalg.norm(shifted, np.inf)))
        if lowest < -tol:
            verdict = REFUTED
        elif lowest > tol or mode == RELAXED:
            verdict = CERTIFIED_EXACT
        else:
            verdict = INCONCLUSIVE
        return CertificateResult(verdict=verdict,
                                 mode=mode,
                                 rho=float(rho),
                                 min_eigenvalue_found=lowest,
                                 max_eigenvalue_found=float(eigs[-1]),
                                 witness_point=origin,
                                 margin=lowest,
                                 exactness_reason="constant Hessian (degree {0})".format(
                                     problem.degree),
                                 samples_evaluated=1)

    points = ball_samples(n, sampling)
    lowest, highest = _spectra(problem, points, rho)
    index = int(np.argmin(lowest))
    found = float(lowest[index])
    # Semidefiniteness tolerates eigenvalues that are zero up to rounding.
    floor = 0.0
    if mode == RELAXED:
        floor = -EXACT_RTOL * max(1.0, abs(found), abs(float(highest[index])))
    if found > margin_floor:
        verdict = CERTIFIED_SAMPLED
    elif found < floor:
        verdict = REFUTED
    else:
        verdict = INCONCLUSIVE
    logging.debug("Convexification at rho=%.17g: %s, min eigenvalue %.17g at %s", rho, verdict,
                  found, points[index])
    return CertificateResult(verdict=verdict,
                             mode=mode,
                             rho=float(rho),
                             min_eigenvalue_found=found,
                             max_eigenvalue_found=float(np.max(highest)),
                             witness_point=points[index],
                             margin=found,
                             samples_evaluated=points.shape[0])


def check_strict_concavity(problem,
                           sampling: Optional[BallSampling] = None,
                           margin_floor: float = MARGIN_FLOOR) -> CertificateResult:
    """Check hess P(u) for negative definiteness on the ball.

    Returns:
        A CertificateResult in strict mode with rho None; witness_point is
        where the largest eigenvalue was found and margin is its negation.
    """
    if sampling is None:
        sampling = BallSampling()
    n = problem.dimension

    if _has_constant_hessian(problem):
        origin = np.zeros(n)
        matrix = problem.hessian(origin)
        eigs = scipy.linalg.eigvalsh(matrix)
        highest = float(eigs[-1])
        tol = EXACT_RTOL * max(1.0, float(np.linalg.norm(matrix, np.inf)))
        if highest < -tol:
            verdict = CERTIFIED_EXACT
        elif highest > tol:
            verdict = REFUTED
        else:
            verdict = INCONCLUSIVE
        return CertificateResult(verdict=verdict,
                                 mode=STRICT,
                                 rho=None,
                                 min_eigenvalue_found=float(eigs[0]),
                                 max_eigenvalue_found=highest,
                                 witness_point=origin,
                                 margin=-highest,
                                 exactness_reason="constant Hessian (degree {0})".format(
                                     problem.degree),
                                 samples_evaluated=1)

    points = ball_samples(n, sampling)
    lowest, highest = _spectra(problem, points, 0.0)
    index = int(np.argmax(highest))
    found = float(highest[index])
    if found < -margin_floor:
        verdict = CERTIFIED_SAMPLED
    elif found > 0.0:
        verdict = REFUTED
    else:
        verdict = INCONCLUSIVE
    return CertificateResult(verdict=verdict,
                             mode=STRICT,
                             rho=None,
                             min_eigenvalue_found=float(np.min(lowest)),
                             max_eigenvalue_found=found,
                             witness_point=points[index],
                             margin=-found,
                             samples_evaluated=points.shape[0])


def minimality_chain(problem, x: polyfun.ArrayLike, rho: float,
                     sampling: Optional[BallSampling] = None) -> MinimalityChain:
    """Check the inequalities that make a certified designee globally minimal.

    Only the samples inside the closed unit ball are used.
    """
    if sampling is None:
        sampling = BallSampling()
    point = polyfun.check_point(problem, x)
    samples = ball_samples(problem.dimension, sampling)
    squares = np.einsum("ij,ij->i", samples, samples)
    inside = squares <= 1.0
    samples = samples[inside]
    squares = squares[inside]
    values = polyfun.value_stack(problem, samples)
    designee_value = problem.value(point)
    convexified = values + 0.5*rho*squares
    return MinimalityChain(
        convexified_slack=float(np.min(convexified - (designee_value + 0.5*rho))),
        shift_slack=float(np.min(0.5 * rho * (1.0-squares))),
        tol=1e-9 * (1.0 + abs(designee_value) + abs(rho)),
        samples_evaluated=int(samples.shape[0]))


def theorem31_verdict(problem,
                      stationary_set: stationary.StationarySet,
                      sampling: Optional[BallSampling] = None,
                      mode: str = STRICT,
                      query: Optional[CertificateQuery] = None,
                      tie_tol: float = stationary.TIE_TOL) -> Theorem31Verdict:
    """Run the convexification certificate at the designee and designate.

    Without a query, the designee is the group of pairs with the largest
    multiplier, and the certificate is checked at that multiplier. A relaxed
    query (x_bar, rho_bar) instead checks at rho_bar, after making sure that
    (x_bar, rho_bar) is stationary; the designee is then every pair of the
    set with multiplier within tie_tol of rho_bar, or the query point itself
    if there is none.

    Args:
        problem: The objective.
        stationary_set (StationarySet): Pairs found by multistart.
        sampling (BallSampling): Sample points. The default is the unit ball
            in strict mode and the ball of radius RELAXED_RADIUS in relaxed
            mode.
        mode (str): STRICT or RELAXED; a query sets the mode.
        query (CertificateQuery): Optional explicit candidate.
        tie_tol (float): Multiplier tolerance for matching pairs to a query.

    Returns:
        A Theorem31Verdict. designated holds the designee only if the
        certificate was certified.

    Raises:
        InvalidInputError: The stationary set is empty, or the query is not
            a stationary point.
    """
    if not stationary_set.pairs:
        raise InvalidInputError("Stationary set is empty")
    if query is not None:
        mode = query.mode
    if mode not in MODES:
        raise InvalidInputError("Unknown certificate mode {0!r}".format(mode))
    if sampling is None:
        sampling = BallSampling(radius=RELAXED_RADIUS if mode == RELAXED else 1.0)

    if query is None:
        designee = stationary_set.largest_group
        rho = designee[0].rho
    else:
        x_bar = polyfun.check_point(problem, query.x_bar)
        residual = stationary.kkt_residual(problem, x_bar, query.rho_bar).inf_norm()
        if residual > QUERY_TOL:
            raise InvalidInputError(
                "Query is not stationary (residual {0:.3g})".format(residual))
        rho = float(query.rho_bar)
        designee = tuple(pair for pair in stationary_set.pairs
                         if abs(pair.rho - rho) <= tie_tol)
        if not designee:
            designee = (stationary.StationaryPair(x_bar, rho, residual), )

    certificate = check_convexification(problem, rho, sampling, mode)
    chain_sampling = BallSampling(sample_count=sampling.sample_count,
                                  seed=sampling.seed,
                                  include_boundary=sampling.include_boundary)
    chain = minimality_chain(problem, designee[0].x, rho, chain_sampling)
    designated: Tuple[stationary.StationaryPair, ...] = ()
    value = None
    if certificate.certified:
        designated = designee
        value = problem.value(designee[0].x)
        if not chain.holds:
            logging.warning("Certified designee fails the minimality chain (slack %.3g)",
                            chain.convexified_slack)
    return Theorem31Verdict(certificate=certificate,
                            designee=designee,
                            designated=designated,
                            designated_value=value,
                            chain=chain,
                            query=query)
