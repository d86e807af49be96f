from hypothesis import assume
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp
import numpy as np
import pytest
import scipy.linalg
from scipy.stats import ortho_group

import certify
from certify import BallSampling, CertificateQuery
from polyfun import InvalidInputError, PolynomialFunction
import stationary
from strategies import quartics

# Concave on the unit ball, and certified at its largest multiplier pair (1, 3.2).
CERTIFIABLE_QUARTIC = PolynomialFunction(1, [(-1.0, [2]), (-1.0, [1]), (-0.05, [4])])


def symmetric_matrices(max_dimension=5):
    return st.integers(1, max_dimension).flatmap(lambda n: hnp.arrays(
        float, (n, n), elements=st.floats(-10.0, 10.0, allow_nan=False))).map(lambda a: a + a.T)


def test_eig_examples():
    matrix = np.diag([3.0, -1.0, 2.0])
    assert certify.min_eig_sym(matrix) == -1.0
    assert certify.max_eig_sym(matrix) == 3.0
    assert certify.min_eig_sym([[2.0, 1.0], [1.0, 2.0]]) == pytest.approx(1.0)


@pytest.mark.parametrize("matrix", [
    [[1.0, 1.0], [0.0, 1.0]],
    [[1.0, 2.0, 3.0]],
    [1.0, 2.0],
])
def test_eig_invalid(matrix):
    with pytest.raises(InvalidInputError):
        certify.min_eig_sym(matrix)


@given(symmetric_matrices(), st.integers(0, 2**16))
def test_eig_rotation_invariant(matrix, seed):
    n = matrix.shape[0]
    if n == 1:
        rotation = np.ones((1, 1))
    else:
        rotation = ortho_group.rvs(n, random_state=seed)
    rotated = rotation @ matrix @ rotation.T
    rotated = 0.5 * (rotated + rotated.T)
    scale = 1.0 + np.max(np.abs(matrix))
    assert certify.min_eig_sym(rotated) == pytest.approx(certify.min_eig_sym(matrix),
                                                         abs=1e-10 * scale)
    assert certify.max_eig_sym(rotated) == pytest.approx(certify.max_eig_sym(matrix),
                                                         abs=1e-10 * scale)


@given(symmetric_matrices(), st.floats(-100.0, 100.0))
def test_eig_shift(matrix, shift):
    shifted = matrix + shift * np.eye(matrix.shape[0])
    scale = 1.0 + np.max(np.abs(matrix)) + abs(shift)
    assert certify.min_eig_sym(shifted) == pytest.approx(certify.min_eig_sym(matrix) + shift,
                                                         abs=1e-10 * scale)


def test_ball_samples_layout():
    sampling = BallSampling(radius=1.5, sample_count=100, seed=2)
    points = certify.ball_samples(2, sampling)
    starts = stationary.MultistartConfig().starts_for(2)
    assert points.shape == (1 + 100 + starts, 2)
    assert np.array_equal(points[0], np.zeros(2))
    assert np.all(np.linalg.norm(points, axis=1) <= 1.5 + 1e-12)
    assert np.linalg.norm(points[101:], axis=1) == pytest.approx(np.full(starts, 1.5))
    assert np.array_equal(points, certify.ball_samples(2, sampling))
    other = certify.ball_samples(2, BallSampling(radius=1.5, sample_count=100, seed=3))
    assert not np.array_equal(points, other)


@pytest.mark.parametrize("dimension", [1, 3])
def test_ball_samples_interior_only(dimension):
    points = certify.ball_samples(dimension, BallSampling(sample_count=50,
                                                          include_boundary=False))
    assert points.shape == (51, dimension)
    assert np.all(np.linalg.norm(points, axis=1) <= 1.0)


def test_ball_samples_1d_boundary():
    points = certify.ball_samples(1, BallSampling(sample_count=10))
    assert points[-2:].tolist() == [[-1.0], [1.0]]


@pytest.mark.parametrize("kwargs", [
    {"radius": 0.5},
    {"sample_count": 0},
    {"seed": -1},
])
def test_ball_sampling_invalid(kwargs):
    with pytest.raises(InvalidInputError):
        BallSampling(**kwargs)


def test_convexification_refuted_on_example(example1):
    result = certify.check_convexification(example1, 8.8)
    assert result.verdict == certify.REFUTED
    assert not result.certified
    assert result.mode == certify.STRICT
    assert result.min_eigenvalue_found == pytest.approx(-15.2, abs=1e-10)
    assert result.witness_point.tolist() == [1.0]
    assert result.margin == result.min_eigenvalue_found
    assert result.exactness_reason is None
    assert result.samples_evaluated == 1 + 4096 + 2


def test_convexification_refuted_relaxed(example1):
    result = certify.check_convexification(example1, 8.8, BallSampling(radius=1.0625),
                                           mode=certify.RELAXED)
    assert result.verdict == certify.REFUTED
    assert result.mode == certify.RELAXED
    assert result.witness_point == pytest.approx([1.0625])


def test_convexification_sampled():
    result = certify.check_convexification(CERTIFIABLE_QUARTIC, 3.2)
    assert result.verdict == certify.CERTIFIED_SAMPLED
    assert result.certified
    assert result.min_eigenvalue_found == pytest.approx(0.6, abs=1e-10)
    assert abs(result.witness_point[0]) == 1.0


def test_convexification_boundary_case():
    strict = certify.check_convexification(CERTIFIABLE_QUARTIC, 2.6)
    assert not strict.certified
    assert strict.min_eigenvalue_found == pytest.approx(0.0, abs=1e-12)
    relaxed = certify.check_convexification(CERTIFIABLE_QUARTIC, 2.6, mode=certify.RELAXED)
    assert relaxed.verdict == certify.INCONCLUSIVE
    above = certify.check_convexification(CERTIFIABLE_QUARTIC, 2.601, mode=certify.RELAXED)
    assert above.verdict == certify.CERTIFIED_SAMPLED


def test_convexification_relaxed_small_negative():
    radius = 1.0625
    rho = 2.0 + 0.6 * radius**2 - 5e-9
    result = certify.check_convexification(CERTIFIABLE_QUARTIC, rho, BallSampling(radius=radius),
                                           mode=certify.RELAXED)
    assert result.verdict == certify.REFUTED
    assert abs(result.witness_point[0]) == pytest.approx(radius)
    recheck = scipy.linalg.eigvalsh(
        CERTIFIABLE_QUARTIC.hessian(result.witness_point) + rho * np.eye(1))
    assert recheck[0] < 0.0
    assert recheck[0] == pytest.approx(-5e-9, abs=1e-12)


@pytest.mark.parametrize("rho,mode,verdict", [
    (3.0, certify.STRICT, certify.CERTIFIED_EXACT),
    (2.0, certify.STRICT, certify.INCONCLUSIVE),
    (2.0, certify.RELAXED, certify.CERTIFIED_EXACT),
    (1.0, certify.STRICT, certify.REFUTED),
    (1.0, certify.RELAXED, certify.REFUTED),
])
def test_convexification_exact(quadratic_1d, rho, mode, verdict):
    result = certify.check_convexification(quadratic_1d, rho, mode=mode)
    assert result.verdict == verdict
    assert result.min_eigenvalue_found == pytest.approx(rho - 2.0)
    assert result.exactness_reason is not None
    assert result.samples_evaluated == 1


def test_convexification_invalid(example1):
    with pytest.raises(InvalidInputError):
        certify.check_convexification(example1, 1.0, mode="loose")
    with pytest.raises(InvalidInputError):
        certify.check_convexification(example1, float("inf"))


def test_strict_concavity_example(example1):
    result = certify.check_strict_concavity(example1)
    assert result.verdict == certify.CERTIFIED_SAMPLED
    assert result.rho is None
    assert result.max_eigenvalue_found <= -0.48 + 1e-12
    assert result.max_eigenvalue_found == pytest.approx(-0.48, abs=1e-4)
    assert result.witness_point == pytest.approx([-0.4], abs=1e-2)
    assert result.margin == -result.max_eigenvalue_found
    assert result.min_eigenvalue_found == pytest.approx(-24.0, abs=1e-10)


def test_strict_concavity_exact(quadratic_1d, convex_1d, anisotropic_2d):
    assert certify.check_strict_concavity(quadratic_1d).verdict == certify.CERTIFIED_EXACT
    assert certify.check_strict_concavity(anisotropic_2d).verdict == certify.CERTIFIED_EXACT
    assert certify.check_strict_concavity(convex_1d).verdict == certify.REFUTED
    linear = PolynomialFunction(1, [(1.0, [1])])
    assert certify.check_strict_concavity(linear).verdict == certify.INCONCLUSIVE


def test_strict_concavity_refuted_sampled():
    saddle = PolynomialFunction(2, [(1.0, [4, 0]), (-1.0, [0, 2])])
    result = certify.check_strict_concavity(saddle)
    assert result.verdict == certify.REFUTED
    assert result.max_eigenvalue_found > 0.0


def test_minimality_chain(quadratic_1d, example1):
    chain = certify.minimality_chain(quadratic_1d, [1.0], 3.0)
    assert chain.holds
    assert chain.shift_slack >= 0.0
    assert chain.samples_evaluated == 1 + 4096 + 2

    chain = certify.minimality_chain(example1, [1.0], 8.8)
    assert not chain.holds
    # P(-1) + 4.4 alone is already 1.6 below P(1) + 4.4
    assert chain.convexified_slack < -1.6


def test_verdict_refuted_on_example(example1):
    found = stationary.multistart_solve(example1)
    verdict = certify.theorem31_verdict(example1, found)
    assert verdict.certificate.verdict == certify.REFUTED
    assert verdict.designee == (found.pairs[1], )
    assert verdict.designated == ()
    assert verdict.designated_value is None
    assert not verdict.chain.holds
    assert verdict.query is None


def test_verdict_certified(quadratic_1d):
    found = stationary.multistart_solve(quadratic_1d)
    verdict = certify.theorem31_verdict(quadratic_1d, found)
    assert verdict.certificate.verdict == certify.CERTIFIED_EXACT
    assert verdict.designated == (found.pairs[1], )
    assert verdict.designated_value == pytest.approx(-2.0)
    assert verdict.chain.holds


def test_verdict_sampled():
    found = stationary.multistart_solve(CERTIFIABLE_QUARTIC)
    verdict = certify.theorem31_verdict(CERTIFIABLE_QUARTIC, found)
    assert verdict.certificate.verdict == certify.CERTIFIED_SAMPLED
    assert verdict.designated[0].x == pytest.approx([1.0])
    assert verdict.designated[0].rho == pytest.approx(3.2)
    assert verdict.chain.holds


def test_verdict_relaxed_defaults(example1):
    found = stationary.multistart_solve(example1)
    verdict = certify.theorem31_verdict(example1, found, mode=certify.RELAXED)
    assert verdict.certificate.mode == certify.RELAXED
    assert verdict.certificate.verdict == certify.REFUTED
    assert np.max(np.abs(verdict.certificate.witness_point)) > 1.0


def test_verdict_tied_designee(anisotropic_2d):
    found = stationary.multistart_solve(anisotropic_2d)
    verdict = certify.theorem31_verdict(anisotropic_2d, found)
    assert len(verdict.designee) == 2
    assert verdict.certificate.verdict == certify.INCONCLUSIVE
    relaxed = certify.theorem31_verdict(anisotropic_2d, found, mode=certify.RELAXED)
    assert relaxed.certificate.verdict == certify.CERTIFIED_EXACT
    assert relaxed.certificate.min_eigenvalue_found == pytest.approx(0.0, abs=1e-12)
    assert len(relaxed.designated) == 2
    assert relaxed.designated_value == pytest.approx(-2.0)


def test_verdict_query(quadratic_1d):
    found = stationary.multistart_solve(quadratic_1d)
    verdict = certify.theorem31_verdict(quadratic_1d, found, query=CertificateQuery([1.0], 3.0))
    assert verdict.certificate.mode == certify.RELAXED
    assert verdict.certificate.verdict == certify.CERTIFIED_EXACT
    assert verdict.designee == (found.pairs[1], )

    verdict = certify.theorem31_verdict(quadratic_1d, found, query=CertificateQuery([-1.0], 1.0))
    assert verdict.certificate.verdict == certify.REFUTED
    assert verdict.designee == (found.pairs[0], )
    assert verdict.designated == ()


def test_verdict_query_not_in_set(quadratic_1d):
    found = stationary.multistart_solve(quadratic_1d)
    only_low = stationary.StationarySet(pairs=found.pairs[:1], groups=((0, ), ), largest_index=0)
    verdict = certify.theorem31_verdict(quadratic_1d, only_low,
                                        query=CertificateQuery([1.0], 3.0))
    assert len(verdict.designee) == 1
    assert verdict.designee[0].rho == 3.0
    assert verdict.designated_value == pytest.approx(-2.0)


def test_verdict_query_not_stationary(quadratic_1d):
    found = stationary.multistart_solve(quadratic_1d)
    with pytest.raises(InvalidInputError):
        certify.theorem31_verdict(quadratic_1d, found, query=CertificateQuery([1.0], 2.5))


def test_verdict_empty_set(example1):
    empty = stationary.StationarySet(pairs=(), groups=(), largest_index=None)
    with pytest.raises(InvalidInputError):
        certify.theorem31_verdict(example1, empty)


@pytest.mark.parametrize("x_bar,rho_bar,mode", [
    ([0.5], 1.0, certify.RELAXED),
    ([1.0], -1.0, certify.RELAXED),
    ([1.0], 1.0, "loose"),
])
def test_query_invalid(x_bar, rho_bar, mode):
    with pytest.raises(InvalidInputError):
        CertificateQuery(x_bar, rho_bar, mode)


@given(quartics(), st.floats(-20.0, 20.0), st.floats(0.0, 50.0))
def test_min_eigenvalue_shifts_with_rho(problem, rho, c):
    sampling = BallSampling(sample_count=32, seed=5)
    before = certify.check_convexification(problem, rho, sampling)
    after = certify.check_convexification(problem, rho + c, sampling)
    assert after.samples_evaluated == before.samples_evaluated
    scale = 1.0 + abs(before.min_eigenvalue_found) + abs(rho) + c
    assert after.min_eigenvalue_found >= before.min_eigenvalue_found - 1e-12 * scale
    assert after.min_eigenvalue_found == pytest.approx(before.min_eigenvalue_found + c,
                                                       abs=1e-12 * scale)


@given(quartics(), st.floats(-10.0, 10.0), st.sampled_from(certify.MODES))
def test_refutation_witness_rechecks(problem, rho, mode):
    assume(problem.degree == 4)
    sampling = BallSampling(sample_count=32, seed=7, radius=1.0625)
    result = certify.check_convexification(problem, rho, sampling, mode=mode)
    if result.verdict != certify.REFUTED:
        return
    witness = result.witness_point
    assert np.linalg.norm(witness) <= 1.0625 + 1e-12
    recheck = scipy.linalg.eigvalsh(problem.hessian(witness) + rho * np.eye(problem.dimension))
    scale = 1.0 + np.max(np.abs(recheck))
    assert recheck[0] == pytest.approx(result.min_eigenvalue_found, abs=1e-10 * scale)
    if result.min_eigenvalue_found < -1e-10 * scale:
        assert recheck[0] < 0.0
