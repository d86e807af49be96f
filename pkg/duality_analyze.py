#!/usr/bin/env python3
"""Analyze a ball-constrained concave minimization problem.

This script reads a polynomial objective P from a problem file and runs the
full analysis: strict concavity of P on the unit ball, the stationary pairs
on the unit sphere, the dual function and its curvature at each pair, the
convexification certificate at the largest multiplier, and, for dimension 3
or less, a brute force grid search for the true global minimum.

A report in which the dual curvature criterion is refuted by the grid search
is a successful analysis, not an error.
"""

import logging
import sys
import time

import duality_common
from polyfun import DualityError
import stationary


def parse_args(argv=None):
    parser = duality_common.create_arg_parser(
        description="Analyze global optimality of stationary points of a concave polynomial "
        "over the unit ball")
    duality_common.add_certificate_args(parser)

    group = parser.add_argument_group(title="Solver options")
    group.add_argument("-t",
                       "--tol",
                       type=float,
                       default=stationary.NEWTON_TOL,
                       dest="newton_tol",
                       help="Newton tolerance for stationary pairs, default: " +
                       str(stationary.NEWTON_TOL))

    return duality_common.run_arg_parser(parser, argv)


def main(argv=None):
    opts = parse_args(argv)

    duality_common.setup_logging(opts)

    start = time.monotonic()
    try:
        problem, name = duality_common.load_problem(opts.problem)
        report = duality_common.analyze_problem(problem,
                                                name,
                                                opts.multistart,
                                                opts.sampling,
                                                opts.grid_spec,
                                                relaxed=opts.relaxed,
                                                value_tol=opts.value_tol)
    except DualityError as e:
        logging.error("%s", duality_common.failure_message(e))
        sys.exit(duality_common.exit_code_for(e))

    if opts.json:
        print(duality_common.format_json(report))
    else:
        print(duality_common.format_text(report, elapsed=time.monotonic() - start))

    sys.exit(duality_common.EXIT_OK)


if __name__ == "__main__":
    main()
