#!/usr/bin/env python3
"""Trace the stationary branch through one stationary pair.

This script finds the stationary pairs of a problem, then follows the branch
rho -> x(rho) through the selected pair over a window of multipliers, and
prints one CSV row per grid point with the columns:

    rho, x_0..x_{n-1}, tangent_0..tangent_{n-1}, dual_value,
    dual_first_derivative, dual_second_derivative, dual_second_derivative_fd

where dual_second_derivative is the closed form value and
dual_second_derivative_fd is the second difference of dual_value along the
trace, empty at the ends of the trace. The output is meant for plotting.

If the branch turns back or the corrector fails inside the window, the
trace stops early on that side, a warning is logged, and the rows traced so
far are still printed.
"""

import json
import logging
import sys

import branch
import dual
import duality_common
from polyfun import DualityError, InvalidInputError, NumericalError
import stationary


def parse_args(argv=None):
    parser = duality_common.create_arg_parser(
        description="Trace the stationary branch through a stationary pair and print the dual "
        "function along it as CSV")

    group = parser.add_argument_group(title="Trace options")
    group.add_argument("-p",
                       "--pair",
                       type=int,
                       default=0,
                       help="Index of the stationary pair, ordered by multiplier, default: 0")
    group.add_argument("-w",
                       "--rho-window",
                       type=float,
                       nargs=2,
                       metavar=("LO", "HI"),
                       help="Multiplier window to trace over, default: rho * (1 -/+ 1/16) -/+ "
                       "0.001")
    group.add_argument("--step",
                       type=float,
                       help="Multiplier step, default: " + str(branch.STEP_FRACTION) +
                       " * max(1, rho)")
    group.add_argument("-t",
                       "--tol",
                       type=float,
                       default=stationary.NEWTON_TOL,
                       dest="newton_tol",
                       help="Newton tolerance for stationary pairs, default: " +
                       str(stationary.NEWTON_TOL))

    return duality_common.run_arg_parser(parser, argv)


def header(dimension):
    names = ["rho"]
    names.extend("x_" + str(i) for i in range(dimension))
    names.extend("tangent_" + str(i) for i in range(dimension))
    names.extend([
        "dual_value", "dual_first_derivative", "dual_second_derivative",
        "dual_second_derivative_fd"
    ])
    return names


def trace_rows(problem, trace: branch.BranchTrace):
    """Yield the values of each trace row, with None for missing values."""
    last = len(trace.points) - 1
    for index, point in enumerate(trace.points):
        try:
            curvature = dual.dual_second_derivative(problem, point.x, point.rho)
        except NumericalError:
            curvature = None
        fd_curvature = None
        if 0 < index < last:
            fd_curvature = branch.fd_dual_second_derivative(problem, trace, point.rho)
        row = [point.rho]
        row.extend(float(v) for v in point.x)
        row.extend(float(v) for v in point.tangent)
        row.extend([
            dual.dual_value(problem, point.x, point.rho),
            dual.dual_first_derivative(point.x), curvature, fd_curvature
        ])
        yield row


def main(argv=None):
    opts = parse_args(argv)

    duality_common.setup_logging(opts)

    try:
        problem, _ = duality_common.load_problem(opts.problem)
        found = stationary.multistart_solve(problem, opts.multistart)
        if not 0 <= opts.pair < len(found.pairs):
            raise InvalidInputError("Pair index {0} out of range; {1} pair(s) found".format(
                opts.pair, len(found.pairs)))
        pair = found.pairs[opts.pair]
        cfg = branch.BranchTraceConfig.around(pair.rho,
                                              step=opts.step,
                                              window=opts.rho_window)
        trace = branch.trace_branch(problem, pair, cfg)
        rows = list(trace_rows(problem, trace))
    except DualityError as e:
        logging.error("%s", duality_common.failure_message(e))
        sys.exit(duality_common.exit_code_for(e))

    names = header(problem.dimension)
    if opts.json:
        print(
            json.dumps(
                {
                    "seed": {
                        "x": duality_common.to_list(pair.x),
                        "rho": duality_common.to_float(pair.rho)
                    },
                    "truncated_below": trace.truncated_below,
                    "truncated_above": trace.truncated_above,
                    "rows": [dict(zip(names, [duality_common.to_float(v) for v in row]))
                             for row in rows],
                },
                indent=2))
    else:
        print(",".join(names))
        for row in rows:
            print(",".join("" if v is None else "%.17g" % v for v in row))

    if trace.truncated:
        logging.warning("Trace is truncated; see the warnings above for where and why")
    sys.exit(duality_common.EXIT_OK)


if __name__ == "__main__":
    main()
