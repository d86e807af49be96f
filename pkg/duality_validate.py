#!/usr/bin/env python3
"""Check the derivatives and dual function formulas of a problem numerically.

This script runs the following checks and prints one PASS, FAIL or SKIP
line for each:

: **gradient** : Gradient against central differences of the value, at
    the stationary pairs and a few quasi-random points of the unit ball.
: **hessian** : Hessian against central differences of the gradient, at
    the same points.
: **tangent** : At each stationary pair, the branch tangent y satisfies
    [hess P(x) + rho * I] y + x = 0.
: **dual curvature** : At each stationary pair, the closed form P_d''
    agrees with a Richardson extrapolated second difference of P_d along a
    short trace of the branch. Skipped where the shifted Hessian is singular and P_d'' does
    not exist.

The exit status is 3 if any check fails.
"""

import logging
import sys
from typing import List, NamedTuple, Optional

import numpy as np

import branch
import certify
import dual
import duality_common
import polyfun
from polyfun import DualityError, NumericalError
import stationary

FD_RTOL = 1e-5
TANGENT_TOL = 1e-9
CURVATURE_RTOL = 1e-4
# Relative multiplier step for the dual curvature second difference.
CURVATURE_STEP = 1e-4
# Quasi-random ball points at which derivatives are checked, besides the pairs.
DERIVATIVE_POINTS = 16

PASS = "PASS"
FAIL = "FAIL"
SKIP = "SKIP"


class CheckResult(NamedTuple):
    name: str
    status: str
    error: Optional[float]
    tolerance: float
    detail: str = ""


def _relative_check(name, exact, approx, rtol, detail) -> CheckResult:
    scale = 1.0 + float(np.max(np.abs(exact)))
    error = float(np.max(np.abs(np.asarray(exact) - np.asarray(approx)))) / scale
    return CheckResult(name, PASS if error <= rtol else FAIL, error, rtol, detail)


def derivative_checks(problem, points: np.ndarray, rtol: float = FD_RTOL) -> List[CheckResult]:
    """Exact gradient and Hessian against central differences at each point."""
    results = []
    for point in points:
        where = "at " + duality_common.fmt(duality_common.to_list(point))
        results.append(
            _relative_check("gradient", polyfun.gradient(problem, point),
                            polyfun.fd_gradient(problem, point), rtol, where))
        results.append(
            _relative_check("hessian", polyfun.hessian(problem, point),
                            polyfun.fd_hessian(problem, point), rtol, where))
    return results


def pair_checks(problem, pair: stationary.StationaryPair, index: int) -> List[CheckResult]:
    """Tangent identity and dual curvature agreement at one stationary pair."""
    where = "at pair {0}".format(index)
    try:
        tangent = branch.branch_tangent(problem, pair.x, pair.rho)
    except NumericalError as e:
        return [
            CheckResult("tangent", SKIP, None, TANGENT_TOL, where + ": " + str(e)),
            CheckResult("dual curvature", SKIP, None, CURVATURE_RTOL, where + ": " + str(e)),
        ]

    shifted = dual.shifted_hessian(problem, pair.x, pair.rho)
    residual = float(np.max(np.abs(shifted @ tangent + pair.x)))
    tangent_tol = TANGENT_TOL * (1.0 + float(np.max(np.abs(pair.x))))
    results = [
        CheckResult("tangent", PASS if residual <= tangent_tol else FAIL, residual, tangent_tol,
                    where)
    ]

    analytic = dual.dual_second_derivative(problem, pair.x, pair.rho)
    step = CURVATURE_STEP * max(1.0, abs(pair.rho))
    cfg = branch.BranchTraceConfig(rho_lo=pair.rho - 2.0*step,
                                   rho_hi=pair.rho + 2.0*step,
                                   step=step)
    try:
        trace = branch.trace_branch(problem, pair, cfg)
        approx = branch.extrapolated_dual_second_derivative(problem, trace, pair.rho)
    except DualityError as e:
        results.append(CheckResult("dual curvature", FAIL, None, CURVATURE_RTOL,
                                   where + ": " + str(e)))
        return results
    error = abs(approx - analytic) / (1.0 + abs(analytic))
    results.append(
        CheckResult("dual curvature", PASS if error <= CURVATURE_RTOL else FAIL, error,
                    CURVATURE_RTOL, where))
    return results


def validate_problem(problem,
                     multistart: Optional[stationary.MultistartConfig] = None,
                     fd_rtol: float = FD_RTOL,
                     seed: int = 0) -> List[CheckResult]:
    """Run every check on a problem.

    Raises:
        SuspectedContinuumError: From the stationary pair search.
    """
    found = stationary.multistart_solve(problem, multistart)
    sampling = certify.BallSampling(sample_count=DERIVATIVE_POINTS,
                                    seed=seed,
                                    include_boundary=False)
    points = certify.ball_samples(problem.dimension, sampling)
    if found.pairs:
        points = np.vstack([points] + [pair.x[None, :] for pair in found.pairs])

    results = derivative_checks(problem, points, fd_rtol)
    for index, pair in enumerate(found.pairs):
        results.extend(pair_checks(problem, pair, index))
    return results


def parse_args(argv=None):
    parser = duality_common.create_arg_parser(
        description="Check exact derivatives and dual function formulas of a problem against "
        "finite differences")

    group = parser.add_argument_group(title="Check options")
    group.add_argument("-t",
                       "--tol",
                       type=float,
                       default=FD_RTOL,
                       help="Relative tolerance for the derivative checks, default: " +
                       str(FD_RTOL))

    opts = duality_common.run_arg_parser(parser, argv)
    if not opts.tol > 0.0:
        parser.error("Tolerance must be positive")
    return opts


def main(argv=None):
    opts = parse_args(argv)

    duality_common.setup_logging(opts)

    try:
        problem, _ = duality_common.load_problem(opts.problem)
        results = validate_problem(problem, opts.multistart, opts.tol, opts.seed)
    except DualityError as e:
        logging.error("%s", duality_common.failure_message(e))
        sys.exit(duality_common.exit_code_for(e))

    if opts.json:
        print(
            duality_common.format_json([{
                "name": result.name,
                "status": result.status,
                "error": duality_common.to_float(result.error),
                "tolerance": result.tolerance,
                "detail": result.detail,
            } for result in results]))
    else:
        for result in results:
            print("{0} {1:15} {2:>10} (tol {3:.3g}) {4}".format(
                result.status, result.name,
                "-" if result.error is None else "%.3g" % result.error, result.tolerance,
                result.detail))

    failed = [result for result in results if result.status == FAIL]
    if failed:
        logging.error("%d of %d checks failed", len(failed), len(results))
        sys.exit(duality_common.EXIT_FAILURE)
    sys.exit(duality_common.EXIT_OK)


if __name__ == "__main__":
    main()
