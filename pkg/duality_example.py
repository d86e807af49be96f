#!/usr/bin/env python3
"""Reproduce the one dimensional quartic counterexample.

This script analyzes the built-in problem

    P(x) = -x^4 - (8/5) x^3 - (6/5) x^2 + (12/5) x

over the interval [-1, 1], which is strictly concave there, and checks the
results against their known exact values: two stationary pairs, (-1, 4) and
(1, 44/5), both with positive dual curvature (5/4 and 5/76), while the
global minimizer is -1 with value -3, not the largest multiplier pair at 1
with value -7/5. The convexification certificate at the largest multiplier
fails, with smallest eigenvalue -76/5 at x = 1.

Every check is printed as PASS or FAIL, with the computed value, the exact
value and their difference. Differences are computed in exact rational
arithmetic from the floating point results. The results are accurate to
about 1e-15, so only a tolerance below the float spacing of the exact
values (0, say) is sure to fail.
"""

from fractions import Fraction
import logging
import sys
import time
from typing import List, NamedTuple, Optional

import certify
import duality_common
from polyfun import DualityError
import polyfun

DEFAULT_TOL = 1e-8

EXAMPLE_NAME = "quartic counterexample"
EXAMPLE_TERMS = [
    (Fraction(-1), [4]),
    (Fraction(-8, 5), [3]),
    (Fraction(-6, 5), [2]),
    (Fraction(12, 5), [1]),
]


class ExampleCheck(NamedTuple):
    name: str
    computed: object
    expected: object
    difference: Optional[Fraction]
    passed: bool


def example_problem() -> polyfun.PolynomialFunction:
    return polyfun.PolynomialFunction(1, ((float(c), p) for c, p in EXAMPLE_TERMS))


def parse_args(argv=None):
    parser = duality_common.create_arg_parser(
        description="Reproduce the quartic counterexample to the dual curvature criterion and "
        "check it against exact values",
        problem_file=False)
    duality_common.add_certificate_args(parser)

    group = parser.add_argument_group(title="Check options")
    group.add_argument("-t",
                       "--tol",
                       type=float,
                       default=DEFAULT_TOL,
                       help="Largest allowed difference from the exact values, default: " +
                       str(DEFAULT_TOL))

    opts = duality_common.run_arg_parser(parser, argv)
    if not opts.tol >= 0.0:
        parser.error("Tolerance must not be negative")
    return opts


def _value_check(name, computed, expected: Fraction, tol: float) -> ExampleCheck:
    if computed is None:
        return ExampleCheck(name, None, expected, None, False)
    difference = abs(Fraction(computed) - expected)
    return ExampleCheck(name, computed, expected, difference, difference <= Fraction(tol))


def _flag_check(name, computed, expected) -> ExampleCheck:
    return ExampleCheck(name, computed, expected, None, computed == expected)


def example_checks(report: duality_common.AnalysisReport, tol: float) -> List[ExampleCheck]:
    """Compare an analysis report of the example with the exact values."""
    pairs = report["stationary"]["pairs"]
    checks = [_flag_check("stationary pair count", len(pairs), 2)]
    if len(pairs) != 2:
        return checks

    for i, (x, rho, value) in enumerate([(Fraction(-1), Fraction(4), Fraction(-3)),
                                         (Fraction(1), Fraction(44, 5), Fraction(-7, 5))]):
        checks.append(_value_check("x of pair {0}".format(i), pairs[i]["x"][0], x, tol))
        checks.append(_value_check("rho of pair {0}".format(i), pairs[i]["rho"], rho, tol))
        checks.append(_value_check("P at pair {0}".format(i), pairs[i]["value"], value, tol))

    for i, curvature in enumerate([Fraction(5, 4), Fraction(5, 76)]):
        checks.append(
            _value_check("P_d'' at pair {0}".format(i), report["dual"][i]["second_derivative"],
                         curvature, tol))
    checks.append(
        _flag_check("dual curvature hypotheses hold", report["theorem32"]["hold_for_all"], True))

    certificate = report["theorem31"]["certificate"]
    checks.append(
        _flag_check("convexification verdict at largest rho", certificate["verdict"],
                    certify.REFUTED))
    checks.append(
        _value_check("min shifted Hessian eigenvalue at largest rho",
                     certificate["min_eigenvalue_found"], Fraction(-76, 5), tol))
    checks.append(
        _flag_check("strict concavity verdict", report["concavity"]["verdict"],
                    certify.CERTIFIED_SAMPLED))

    oracle_report = report["oracle"]
    checks.append(_value_check("grid minimum", oracle_report["min_value"], Fraction(-3), tol))
    checks.append(_value_check("grid argmin", oracle_report["argmin"][0], Fraction(-1), tol))
    refutation = report["refutation"]
    checks.append(_flag_check("refutation recorded", refutation is not None, True))
    if refutation is not None:
        checks.append(_value_check("refutation gap", refutation["gap"], Fraction(8, 5), tol))
    checks.append(_flag_check("dual curvature criterion refuted", report["theorem32"]["refuted"],
                              True))
    return checks


def check_dict(check: ExampleCheck):
    def plain(value):
        if isinstance(value, Fraction):
            return str(value)
        return value

    return {
        "name": check.name,
        "computed": check.computed,
        "expected": plain(check.expected),
        "difference": None if check.difference is None else float(check.difference),
        "passed": check.passed,
    }


def main(argv=None):
    opts = parse_args(argv)

    duality_common.setup_logging(opts)

    start = time.monotonic()
    try:
        report = duality_common.analyze_problem(example_problem(),
                                                EXAMPLE_NAME,
                                                opts.multistart,
                                                opts.sampling,
                                                opts.grid_spec,
                                                relaxed=opts.relaxed,
                                                value_tol=opts.value_tol)
    except DualityError as e:
        logging.error("%s", duality_common.failure_message(e))
        sys.exit(duality_common.exit_code_for(e))

    checks = example_checks(report, opts.tol)

    if opts.json:
        output = dict(report)
        output["checks"] = [check_dict(check) for check in checks]
        print(duality_common.format_json(output))
    else:
        print(duality_common.format_text(report, elapsed=time.monotonic() - start))
        print()
        for check in checks:
            print("{0} {1:46} computed {2}, expected {3}, difference {4}".format(
                "PASS" if check.passed else "FAIL", check.name,
                duality_common.fmt(check.computed), check.expected,
                "-" if check.difference is None else "%.3g" % float(check.difference)))

    failed = [check.name for check in checks if not check.passed]
    if failed:
        logging.error("Failed checks: %s", ", ".join(failed))
        sys.exit(duality_common.EXIT_FAILURE)
    sys.exit(duality_common.EXIT_OK)


if __name__ == "__main__":
    main()
