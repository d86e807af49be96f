import numpy as np
import pytest

import branch
from branch import BranchTraceConfig
import dual
from polyfun import InvalidInputError, NumericalError
from stationary import StationaryPair


def pair_at(x, rho):
    return StationaryPair(np.array(x, dtype=float), rho, 0.0)


@pytest.mark.parametrize("rho", [2.5, 3.0, 5.0])
def test_tangent_quadratic(quadratic_1d, rho):
    x = [1.0 / (rho-2.0)]
    assert branch.branch_tangent(quadratic_1d, x, rho) == pytest.approx([-(rho - 2.0)**-2],
                                                                        rel=1e-12)


def test_tangent_example(example1):
    assert branch.branch_tangent(example1, [-1.0], 4.0) == pytest.approx([-1.25], rel=1e-12)
    assert branch.branch_tangent(example1, [1.0], 8.8) == pytest.approx([1.0 / 15.2], rel=1e-12)


def test_tangent_singular(anisotropic_2d):
    with pytest.raises(NumericalError) as excinfo:
        branch.branch_tangent(anisotropic_2d, [1.0, 0.0], 2.0)
    assert excinfo.value.kind == "singular-shifted-hessian"


@pytest.mark.parametrize("kwargs", [
    {"rho_lo": 1.0, "rho_hi": 1.0, "step": 0.1},
    {"rho_lo": 2.0, "rho_hi": 1.0, "step": 0.1},
    {"rho_lo": 1.0, "rho_hi": 2.0, "step": 0.0},
    {"rho_lo": 1.0, "rho_hi": 2.0, "step": 0.1, "max_corrector_iters": 0},
])
def test_config_invalid(kwargs):
    with pytest.raises(InvalidInputError):
        BranchTraceConfig(**kwargs)


def test_config_around():
    cfg = BranchTraceConfig.around(4.0)
    assert cfg.rho_lo == pytest.approx(3.749)
    assert cfg.rho_hi == pytest.approx(4.251)
    assert cfg.step == pytest.approx(0.04)
    cfg = BranchTraceConfig.around(0.5, step=0.1, window=(0.0, 1.0))
    assert (cfg.rho_lo, cfg.rho_hi, cfg.step) == (0.0, 1.0, 0.1)


def test_trace_quadratic(quadratic_1d):
    cfg = BranchTraceConfig(rho_lo=2.9, rho_hi=3.1, step=1e-3)
    trace = branch.trace_branch(quadratic_1d, pair_at([1.0], 3.0), cfg)
    assert not trace.truncated
    assert len(trace.points) == 201
    assert np.all(np.diff(trace.rhos) > 0.0)
    assert trace.points[0].rho == pytest.approx(2.9)
    assert trace.points[-1].rho == pytest.approx(3.1)
    for point in trace.points:
        assert point.x == pytest.approx([1.0 / (point.rho - 2.0)], abs=1e-10)
        assert point.residual_inf_norm <= branch.CORRECTOR_TOL


def test_trace_fd_curvature_quadratic(quadratic_1d):
    cfg = BranchTraceConfig(rho_lo=2.9, rho_hi=3.1, step=1e-3)
    trace = branch.trace_branch(quadratic_1d, pair_at([1.0], 3.0), cfg)
    for point in trace.points[1:-1:20]:
        expected = -(point.rho - 2.0)**-3
        approx = branch.fd_dual_second_derivative(quadratic_1d, trace, point.rho)
        assert approx == pytest.approx(expected, rel=1e-5)


def test_trace_example_folds_below(example1):
    cfg = BranchTraceConfig(rho_lo=3.5, rho_hi=4.5, step=0.01)
    trace = branch.trace_branch(example1, pair_at([-1.0], 4.0), cfg)
    assert trace.truncated
    assert trace.truncated_below is not None
    assert trace.truncated_above is None
    assert trace.points[0].rho > 3.97
    assert trace.points[-1].rho == pytest.approx(4.5)
    assert np.all(np.diff(trace.rhos) > 0.0)
    # x moves away from the fold as rho grows
    xs = np.array([point.x[0] for point in trace.points])
    assert np.all(np.diff(xs) < 0.0)


def test_trace_example_largest_pair(example1):
    cfg = BranchTraceConfig(rho_lo=8.3, rho_hi=9.3, step=0.01)
    trace = branch.trace_branch(example1, pair_at([1.0], 8.8), cfg)
    assert not trace.truncated
    assert len(trace.points) == 101
    xs = np.array([point.x[0] for point in trace.points])
    assert np.all(np.diff(xs) > 0.0)
    for point in trace.points:
        shifted = dual.shifted_hessian(example1, point.x, point.rho)
        assert shifted @ point.tangent + point.x == pytest.approx([0.0], abs=1e-9)


def test_trace_dual_first_derivative(example1):
    cfg = BranchTraceConfig(rho_lo=8.3, rho_hi=9.3, step=0.01)
    trace = branch.trace_branch(example1, pair_at([1.0], 8.8), cfg)
    values = [dual.dual_value(example1, point.x, point.rho) for point in trace.points]
    for i in range(1, len(trace.points) - 1, 10):
        central = (values[i + 1] - values[i - 1]) / (trace.points[i + 1].rho -
                                                     trace.points[i - 1].rho)
        assert central == pytest.approx(dual.dual_first_derivative(trace.points[i].x), abs=1e-6)


def test_trace_fd_curvature_example(example1):
    cfg = BranchTraceConfig(rho_lo=8.7, rho_hi=8.9, step=1e-3)
    trace = branch.trace_branch(example1, pair_at([1.0], 8.8), cfg)
    assert not trace.truncated
    for point in trace.points[1:-1:25]:
        approx = branch.fd_dual_second_derivative(example1, trace, point.rho)
        exact = dual.dual_second_derivative(example1, point.x, point.rho)
        assert approx == pytest.approx(exact, rel=1e-5)
    seed_curvature = branch.fd_dual_second_derivative(example1, trace, 8.8)
    assert seed_curvature == pytest.approx(5.0 / 76.0, rel=1e-5)


def test_trace_reseeded(example1):
    cfg = BranchTraceConfig(rho_lo=8.3, rho_hi=9.3, step=0.01)
    trace = branch.trace_branch(example1, pair_at([1.0], 8.8), cfg)
    k = 70
    point = trace.points[k]
    reseeded = branch.trace_branch(
        example1, StationaryPair(point.x, point.rho, point.residual_inf_norm),
        BranchTraceConfig(rho_lo=point.rho - 0.02, rho_hi=point.rho + 0.02, step=0.01))
    assert len(reseeded.points) == 5
    for offset in (-2, -1, 1, 2):
        assert reseeded.points[2 + offset].x == pytest.approx(trace.points[k + offset].x,
                                                              abs=1e-9)


def test_partial_last_step(quadratic_1d):
    cfg = BranchTraceConfig(rho_lo=2.95, rho_hi=3.025, step=0.01)
    trace = branch.trace_branch(quadratic_1d, pair_at([1.0], 3.0), cfg)
    assert not trace.truncated
    assert trace.rhos == pytest.approx([2.95, 2.96, 2.97, 2.98, 2.99, 3.0, 3.01, 3.02, 3.025])
    approx = branch.fd_dual_second_derivative(quadratic_1d, trace, 3.02)
    # first order accurate on the shortened step
    assert approx == pytest.approx(-(3.02 - 2.0)**-3, rel=2e-2)


def test_fd_curvature_needs_interior_point(quadratic_1d):
    cfg = BranchTraceConfig(rho_lo=2.9, rho_hi=3.1, step=0.01)
    trace = branch.trace_branch(quadratic_1d, pair_at([1.0], 3.0), cfg)
    with pytest.raises(InvalidInputError):
        branch.fd_dual_second_derivative(quadratic_1d, trace, 2.9)
    with pytest.raises(InvalidInputError):
        branch.fd_dual_second_derivative(quadratic_1d, trace, 3.1)
    with pytest.raises(InvalidInputError):
        branch.fd_dual_second_derivative(quadratic_1d, trace, 3.005)
    assert trace.index_of(3.005) is None
    assert trace.index_of(3.0) == 10


def test_extrapolated_curvature_near_fold(quadratic_1d):
    # the branch x = 1 / (rho - 2) folds at rho = 2
    cfg = BranchTraceConfig(rho_lo=2.47, rho_hi=2.53, step=0.01)
    trace = branch.trace_branch(quadratic_1d, pair_at([2.0], 2.5), cfg)
    assert len(trace.points) == 7
    exact = -(0.5)**-3
    plain = branch.fd_dual_second_derivative(quadratic_1d, trace, 2.5)
    assert abs(plain - exact) > 1e-4 * abs(exact)
    extrapolated = branch.extrapolated_dual_second_derivative(quadratic_1d, trace, 2.5)
    assert extrapolated == pytest.approx(exact, rel=1e-5)


def test_fd_curvature_stride(quadratic_1d):
    cfg = BranchTraceConfig(rho_lo=2.98, rho_hi=3.02, step=0.01)
    trace = branch.trace_branch(quadratic_1d, pair_at([1.0], 3.0), cfg)
    wide = branch.fd_dual_second_derivative(quadratic_1d, trace, 3.0, stride=2)
    assert wide == pytest.approx(-1.0, rel=1e-3)
    with pytest.raises(InvalidInputError):
        branch.fd_dual_second_derivative(quadratic_1d, trace, 2.99, stride=2)
    with pytest.raises(InvalidInputError):
        branch.fd_dual_second_derivative(quadratic_1d, trace, 3.0, stride=0)


def test_extrapolated_curvature_needs_uniform_grid(quadratic_1d):
    cfg = BranchTraceConfig(rho_lo=2.95, rho_hi=3.025, step=0.01)
    trace = branch.trace_branch(quadratic_1d, pair_at([1.0], 3.0), cfg)
    with pytest.raises(InvalidInputError, match="not uniform"):
        branch.extrapolated_dual_second_derivative(quadratic_1d, trace, 3.01)
    with pytest.raises(InvalidInputError):
        branch.extrapolated_dual_second_derivative(quadratic_1d, trace, 3.02)


def test_seed_not_stationary(example1):
    cfg = BranchTraceConfig(rho_lo=3.5, rho_hi=4.5, step=0.01)
    with pytest.raises(InvalidInputError):
        branch.trace_branch(example1, pair_at([-0.9], 4.0), cfg)


def test_seed_outside_window(example1):
    cfg = BranchTraceConfig(rho_lo=5.0, rho_hi=6.0, step=0.01)
    with pytest.raises(InvalidInputError):
        branch.trace_branch(example1, pair_at([-1.0], 4.0), cfg)


def test_seed_singular(isotropic_2d):
    cfg = BranchTraceConfig(rho_lo=1.5, rho_hi=2.5, step=0.01)
    with pytest.raises(NumericalError) as excinfo:
        branch.trace_branch(isotropic_2d, pair_at([1.0, 0.0], 2.0), cfg)
    assert excinfo.value.kind == "singular-shifted-hessian"
