import numpy as np
import pytest

import oracle
from oracle import GridSpec
from polyfun import InvalidInputError, PolynomialFunction
import stationary


def test_grid_example(example1):
    result = oracle.global_min_grid(example1)
    assert result.argmin.tolist() == [-1.0]
    assert result.min_value == pytest.approx(-3.0, abs=1e-12)
    assert result.grid_resolution == pytest.approx(1e-4)
    assert result.points_evaluated == 20001 + 2


def test_grid_quadratic(quadratic_1d):
    result = oracle.global_min_grid(quadratic_1d, GridSpec(points_per_axis=101))
    assert result.argmin.tolist() == [1.0]
    assert result.min_value == -2.0


def test_grid_tie_break(anisotropic_2d):
    result = oracle.global_min_grid(anisotropic_2d, GridSpec(points_per_axis=201))
    assert result.min_value == pytest.approx(-2.0, abs=1e-12)
    assert abs(result.argmin[0]) < 1e-12
    assert result.argmin[1] == pytest.approx(-1.0)


def test_grid_3d(separable_3d):
    result = oracle.global_min_grid(separable_3d, GridSpec(points_per_axis=41))
    found = stationary.multistart_solve(separable_3d)
    best = min(separable_3d.value(pair.x) for pair in found.pairs)
    assert result.min_value >= best - 1e-9
    assert result.min_value == pytest.approx(best, abs=1e-2)
    assert result.points_evaluated > 41**3 // 2


def test_grid_dimension_limit():
    quartic_4d = PolynomialFunction(4, [(-1.0, [2, 0, 0, 0]), (-1.0, [0, 0, 0, 4])])
    with pytest.raises(InvalidInputError, match="multistart"):
        oracle.global_min_grid(quartic_4d)


def test_grid_lower_dimension_limit(anisotropic_2d):
    with pytest.raises(InvalidInputError):
        oracle.global_min_grid(anisotropic_2d, GridSpec(dimension_limit=1))


@pytest.mark.parametrize("kwargs", [{"points_per_axis": 2}, {"dimension_limit": 0}])
def test_grid_spec_invalid(kwargs):
    with pytest.raises(InvalidInputError):
        GridSpec(**kwargs)


def test_grid_spec_defaults():
    assert GridSpec().points_for(1) == 20001
    assert GridSpec().points_for(2) == 1501
    assert GridSpec().points_for(3) == 201
    assert GridSpec(points_per_axis=11).points_for(3) == 11


@pytest.mark.parametrize("dimension", [2, 3])
def test_sphere_grid(dimension):
    points = oracle.sphere_grid(dimension, 11)
    assert np.linalg.norm(points, axis=1) == pytest.approx(np.ones(points.shape[0]))
    expected = 40 if dimension == 2 else 21 * 40
    assert points.shape == (expected, dimension)


def test_sphere_grid_nested():
    coarse = oracle.sphere_grid(2, 11)
    fine = oracle.sphere_grid(2, 21)
    assert fine[::2] == pytest.approx(coarse, abs=1e-15)


def test_grid_refinement(anisotropic_2d, example1):
    skewed = anisotropic_2d + PolynomialFunction(2, [(0.3, [1, 0]), (-0.2, [0, 1])])
    for problem in (skewed, example1):
        previous = None
        for points in (11, 21, 41, 81):
            result = oracle.global_min_grid(problem, GridSpec(points_per_axis=points))
            if previous is not None:
                assert result.min_value <= previous + 1e-12
            previous = result.min_value


def test_compare_refuted(example1):
    found = stationary.multistart_solve(example1)
    comparison = oracle.compare_candidates(example1, found, oracle.global_min_grid(example1))
    assert comparison.best_index == 0
    assert comparison.designee_indices == (1, )
    assert not comparison.designee_matches
    assert comparison.oracle_consistent
    assert [entry.value for entry in comparison.pair_values] == pytest.approx([-3.0, -1.4],
                                                                              abs=1e-10)
    refutation = comparison.refutation
    assert refutation is not None
    assert refutation.designee_index == 1
    assert refutation.designee_rho == pytest.approx(8.8)
    assert refutation.designee_value == pytest.approx(-1.4)
    assert refutation.oracle_value == pytest.approx(-3.0)
    assert refutation.oracle_argmin.tolist() == [-1.0]
    assert refutation.gap == pytest.approx(1.6, abs=1e-10)


def test_compare_matches(quadratic_1d):
    found = stationary.multistart_solve(quadratic_1d)
    comparison = oracle.compare_candidates(quadratic_1d, found,
                                           oracle.global_min_grid(quadratic_1d))
    assert comparison.designee_matches
    assert comparison.best_index == 1
    assert comparison.refutation is None
    assert comparison.value_tol == oracle.VALUE_TOL


def test_compare_tied_designee(anisotropic_2d):
    found = stationary.multistart_solve(anisotropic_2d)
    result = oracle.global_min_grid(anisotropic_2d, GridSpec(points_per_axis=101))
    comparison = oracle.compare_candidates(anisotropic_2d, found, result)
    assert comparison.designee_indices == (2, 3)
    assert comparison.designee_matches


def test_compare_inconsistent(example1):
    found = stationary.multistart_solve(example1)
    fake = oracle.OracleResult(argmin=np.array([0.0]), min_value=0.0, grid_resolution=1.0)
    comparison = oracle.compare_candidates(example1, found, fake)
    assert not comparison.oracle_consistent
    assert comparison.designee_matches


def test_compare_empty_set(example1):
    empty = stationary.StationarySet(pairs=(), groups=(), largest_index=None)
    with pytest.raises(InvalidInputError):
        oracle.compare_candidates(example1, empty, oracle.global_min_grid(example1))


def random_concave_quadratic(seed):
    rng = np.random.default_rng(seed)
    b_matrix = rng.uniform(-1.0, 1.0, size=(2, 2))
    a = b_matrix @ b_matrix.T + 0.1 * np.eye(2)
    b = rng.uniform(-1.0, 1.0, size=2)
    return PolynomialFunction(2, [
        (-0.5 * a[0, 0], [2, 0]),
        (-a[0, 1], [1, 1]),
        (-0.5 * a[1, 1], [0, 2]),
        (b[0], [1, 0]),
        (b[1], [0, 1]),
    ])


@pytest.mark.parametrize("seed", range(100))
def test_largest_multiplier_is_global_for_quadratics(seed):
    problem = random_concave_quadratic(seed)
    found = stationary.multistart_solve(problem)
    result = oracle.global_min_grid(problem, GridSpec(points_per_axis=201))
    comparison = oracle.compare_candidates(problem, found, result)
    assert comparison.designee_matches
    assert comparison.oracle_consistent
