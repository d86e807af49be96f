"""Shared code among the duality_* commands

Note:

    This module is not intended to be generically useful or to export a stable
    interface. Rather, it should be considered an implementation detail of the
    other scripts, and will change as needed.

    For modules that export interfaces intended for general use, see polyfun,
    stationary, dual, branch, certify and oracle.

Problem files are JSON objects of the form:

    {"name": "optional label",
     "dimension": 1,
     "polynomial": [{"c": -1.0, "p": [4]}, {"c": "-8/5", "p": [3]}]}

where each entry of polynomial is one term, with coefficient c and exponent
vector p. A coefficient may be a JSON number or a string holding an exact
fraction.
"""

import argparse
from fractions import Fraction
import json
import logging
import math
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from typing_extensions import TypedDict

import certify
import dual
import oracle
import polyfun
from polyfun import InvalidInputError, NumericalError
import stationary

EXIT_OK = 0
EXIT_INVALID_INPUT = 2
EXIT_FAILURE = 3


class ProblemFileError(InvalidInputError):
    """Provides error info when a problem file cannot be read or is invalid."""


class ProblemDict(TypedDict):
    name: Optional[str]
    dimension: int
    degree: Optional[int]
    polynomial: List[Dict[str, Any]]


class PairDict(TypedDict):
    index: int
    x: List[float]
    rho: float
    value: float
    residual_inf_norm: float
    iterations: int


class StationaryDict(TypedDict):
    pairs: List[PairDict]
    groups: List[List[int]]
    largest_index: Optional[int]
    nonpositive_rho_pairs: List[PairDict]
    failed_starts: int


class CertificateDict(TypedDict):
    verdict: str
    mode: str
    rho: Optional[float]
    min_eigenvalue_found: float
    max_eigenvalue_found: float
    witness_point: List[float]
    margin: float
    exactness_reason: Optional[str]
    samples_evaluated: int


class DualDict(TypedDict):
    index: int
    rho: float
    value: float
    first_derivative: float
    second_derivative: Optional[float]
    det_shifted_hessian: float
    inverse_form: Optional[float]
    curvature_positive: bool


class HypothesisDict(TypedDict):
    index: int
    det_nonzero: bool
    curvature_positive: bool
    inverse_form_negative: bool
    scalar_condition: Optional[float]
    failure: Optional[str]


class Theorem32Dict(TypedDict):
    pairs: List[HypothesisDict]
    hold_for_all: bool
    designee_indices: List[int]
    refuted: Optional[bool]


class ChainDict(TypedDict):
    convexified_slack: float
    shift_slack: float
    holds: bool


class Theorem31Dict(TypedDict):
    certificate: CertificateDict
    designee: List[Dict[str, Any]]
    designated: bool
    designated_value: Optional[float]
    minimality_chain: ChainDict


class OracleDict(TypedDict):
    argmin: List[float]
    min_value: float
    grid_resolution: float
    points_evaluated: int
    best_index: Optional[int]
    designee_indices: List[int]
    designee_matches: Optional[bool]
    oracle_consistent: Optional[bool]
    value_tol: float


class RefutationDict(TypedDict):
    designee_index: int
    designee_x: List[float]
    designee_rho: float
    designee_value: float
    oracle_argmin: List[float]
    oracle_value: float
    gap: float


class MetaDict(TypedDict):
    seed: int
    start_count: int
    newton_tol: float
    sample_count: int
    sampling_radius: float
    relaxed: bool
    points_per_axis: Optional[int]


class AnalysisReport(TypedDict):
    problem: ProblemDict
    concavity: CertificateDict
    stationary: StationaryDict
    dual: List[DualDict]
    theorem31: Optional[Theorem31Dict]
    theorem32: Optional[Theorem32Dict]
    oracle: Optional[OracleDict]
    refutation: Optional[RefutationDict]
    meta: MetaDict


def _parse_coeff(value) -> float:
    if isinstance(value, bool):
        raise ProblemFileError("Coefficient must be a number, got {0!r}".format(value))
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(Fraction(value.strip()))
        except (ValueError, ZeroDivisionError) as e:
            raise ProblemFileError("Bad coefficient {0!r}: {1}".format(value, str(e))) from e
    raise ProblemFileError("Coefficient must be a number or fraction string, got {0!r}".format(
        value))


def parse_problem(data) -> Tuple[polyfun.PolynomialFunction, Optional[str]]:
    """Build the objective from decoded problem file JSON.

    Returns:
        A tuple of the polynomial and its name, which may be None.

    Raises:
        ProblemFileError: The data does not follow the problem file schema.
    """
    if not isinstance(data, dict):
        raise ProblemFileError("Problem file must hold a JSON object")
    dimension = data.get("dimension")
    if isinstance(dimension, bool) or not isinstance(dimension, int) or dimension < 1:
        raise ProblemFileError("dimension must be a positive integer")
    name = data.get("name")
    if name is not None and not isinstance(name, str):
        raise ProblemFileError("name must be a string")
    terms = data.get("polynomial")
    if not isinstance(terms, list):
        raise ProblemFileError("polynomial must be a list of terms")

    parsed = []
    for i, term in enumerate(terms):
        if not isinstance(term, dict) or "c" not in term or "p" not in term:
            raise ProblemFileError("Term {0} must be an object with c and p".format(i))
        powers = term["p"]
        if not isinstance(powers, list) or any(
                isinstance(p, bool) or not isinstance(p, int) for p in powers):
            raise ProblemFileError("Term {0}: p must be a list of integers".format(i))
        if len(powers) != dimension:
            raise ProblemFileError("Term {0}: p has length {1}, dimension is {2}".format(
                i, len(powers), dimension))
        parsed.append((_parse_coeff(term["c"]), powers))

    try:
        return polyfun.PolynomialFunction(dimension, parsed), name
    except InvalidInputError as e:
        raise ProblemFileError(str(e)) from e


def load_problem(path: str) -> Tuple[polyfun.PolynomialFunction, Optional[str]]:
    """Read and parse a problem file.

    Raises:
        ProblemFileError: The file cannot be read, is not JSON, or does not
            follow the problem file schema.
    """
    try:
        with open(path, "r") as infile:
            data = json.load(infile)
    except OSError as e:
        raise ProblemFileError("Failed opening problem file: {0}".format(str(e))) from e
    except ValueError as e:
        raise ProblemFileError("Problem file is not valid JSON: {0}".format(str(e))) from e
    return parse_problem(data)


def create_arg_parser(description, problem_file=True):
    """Create an argparse parser and add the common command line options."""
    parser = argparse.ArgumentParser(
        description=description,
        epilog="Additional arguments can be read from a file by including @FILENAME as an "
        "option, where FILENAME is a path to a file that contains arguments, one per line.",
        fromfile_prefix_chars="@",
        add_help=False)

    group = parser.add_argument_group(title="General options")
    group.add_argument("-h", "--help", action="help", help="Be helpful")
    group.add_argument("-j",
                       "--json",
                       action="store_true",
                       help="Print machine-readable JSON instead of text")
    group.add_argument("-v", "--verbose", action="store_true", help="Be verbose")

    group = parser.add_argument_group(title="Stationary pair search options")
    group.add_argument("-s",
                       "--seed",
                       type=int,
                       default=0,
                       help="Seed for start points and certificate samples, default: 0")
    group.add_argument("-n",
                       "--starts",
                       type=int,
                       help="Number of Newton start points on the sphere, default: max(" +
                       str(stationary.MIN_START_COUNT) + ", " +
                       str(stationary.STARTS_PER_DIMENSION) + " * dimension)")

    if problem_file:
        parser.add_argument("problem", help="Path to the problem JSON file")

    return parser


def add_certificate_args(parser):
    """Add the certificate and oracle option groups."""
    group = parser.add_argument_group(title="Certificate options")
    group.add_argument("-r",
                       "--radius",
                       type=float,
                       help="Sampling radius for the convexification certificate, default: 1, "
                       "or " + str(certify.RELAXED_RADIUS) + " with --relaxed")
    group.add_argument("-R",
                       "--relaxed",
                       action="store_true",
                       help="Accept positive semidefinite shifted Hessians on the sampling "
                       "ball instead of requiring positive definite on the unit ball")
    group.add_argument("-S",
                       "--samples",
                       type=int,
                       help="Number of interior ball samples, default: " +
                       str(certify.SAMPLES_PER_DIMENSION) + " * dimension")

    group = parser.add_argument_group(title="Grid oracle options")
    group.add_argument("-g",
                       "--grid",
                       type=int,
                       help="Grid points per axis, default: " + ", ".join(
                           "{0} for n={1}".format(v, k) for k, v in oracle.DEFAULT_POINTS.items()))
    group.add_argument("--value-tol",
                       type=float,
                       default=oracle.VALUE_TOL,
                       help="Tolerance for matching the designee value with the grid "
                       "minimum, default: " + str(oracle.VALUE_TOL))


def run_arg_parser(parser, argv=None):
    """Run parse_args on a parser previously created with create_arg_parser

    Also builds the module configuration objects from the options, reporting
    invalid values as usage errors.

    Args:
        argv (list[str]): Arguments to parse, default: the command line.

    Returns:
        An argparse Namespace object with the parsed options set as attributes,
        plus multistart, and, if the certificate options were added,
        sampling and grid_spec.
    """
    opts = parser.parse_args(argv)

    try:
        kwargs = {}
        # scripts with a Newton tolerance option store it as newton_tol
        if getattr(opts, "newton_tol", None) is not None:
            kwargs["newton_tol"] = opts.newton_tol
        opts.multistart = stationary.MultistartConfig(seed=opts.seed,
                                                      start_count=opts.starts,
                                                      **kwargs)
        if hasattr(opts, "relaxed"):
            radius = opts.radius
            if radius is None:
                radius = certify.RELAXED_RADIUS if opts.relaxed else 1.0
            opts.sampling = certify.BallSampling(radius=radius,
                                                 sample_count=opts.samples,
                                                 seed=opts.seed)
            opts.grid_spec = oracle.GridSpec(points_per_axis=opts.grid)
            if not opts.value_tol > 0.0:
                raise InvalidInputError("value tolerance must be positive")
    except InvalidInputError as e:
        parser.error(str(e))

    return opts


def setup_logging(opts):
    logging.basicConfig(format="%(levelname)s: %(message)s",
                        level=logging.DEBUG if opts.verbose else logging.WARNING)


def exit_code_for(e: Exception) -> int:
    """Map a library exception to a script exit code."""
    if isinstance(e, (InvalidInputError, stationary.SuspectedContinuumError)):
        return EXIT_INVALID_INPUT
    return EXIT_FAILURE


def to_float(value) -> Optional[float]:
    """Plain float for the reports; non-finite values become None."""
    if value is None:
        return None
    value = float(value)
    return value if math.isfinite(value) else None


def to_list(vector) -> List[float]:
    return [to_float(v) for v in np.atleast_1d(vector)]


def problem_dict(problem, name: Optional[str]) -> ProblemDict:
    terms = [{"c": coeff, "p": list(powers)} for coeff, powers in getattr(problem, "terms", ())]
    return {
        "name": name,
        "dimension": problem.dimension,
        "degree": problem.degree,
        "polynomial": terms,
    }


def pair_dict(problem, index: int, pair: stationary.StationaryPair) -> PairDict:
    return {
        "index": index,
        "x": to_list(pair.x),
        "rho": to_float(pair.rho),
        "value": to_float(polyfun.evaluate(problem, pair.x)),
        "residual_inf_norm": to_float(pair.residual_inf_norm),
        "iterations": pair.iterations,
    }


def certificate_dict(result: certify.CertificateResult) -> CertificateDict:
    return {
        "verdict": result.verdict,
        "mode": result.mode,
        "rho": to_float(result.rho),
        "min_eigenvalue_found": to_float(result.min_eigenvalue_found),
        "max_eigenvalue_found": to_float(result.max_eigenvalue_found),
        "witness_point": to_list(result.witness_point),
        "margin": to_float(result.margin),
        "exactness_reason": result.exactness_reason,
        "samples_evaluated": result.samples_evaluated,
    }


def dual_dict(index: int, evaluation: dual.DualEvaluation) -> DualDict:
    return {
        "index": index,
        "rho": to_float(evaluation.rho),
        "value": to_float(evaluation.value),
        "first_derivative": to_float(evaluation.first_derivative),
        "second_derivative": to_float(evaluation.second_derivative),
        "det_shifted_hessian": to_float(evaluation.det_shifted_hessian),
        "inverse_form": to_float(evaluation.inverse_form),
        "curvature_positive": evaluation.curvature_positive,
    }


def analyze_problem(problem,
                    name: Optional[str],
                    multistart: stationary.MultistartConfig,
                    sampling: certify.BallSampling,
                    grid_spec: oracle.GridSpec,
                    relaxed: bool = False,
                    value_tol: float = oracle.VALUE_TOL) -> AnalysisReport:
    """Run the full analysis pipeline on a problem.

    Runs, in order: the strict concavity check, the stationary pair search,
    dual evaluations and curvature hypotheses at every pair, the
    convexification certificate at the largest multiplier, and, for small
    enough dimensions, the grid oracle comparison.

    Raises:
        SuspectedContinuumError: From the stationary pair search.
        InvalidInputError: Bad configuration.
        NumericalError: A step failed in a way that aborts the analysis.
    """
    n = problem.dimension
    concavity_sampling = certify.BallSampling(sample_count=sampling.sample_count,
                                              seed=sampling.seed,
                                              include_boundary=sampling.include_boundary)
    concavity = certify.check_strict_concavity(problem, concavity_sampling)
    if not concavity.certified:
        logging.warning("Objective is not certified strictly concave on the unit ball (%s)",
                        concavity.verdict)

    found = stationary.multistart_solve(problem, multistart)
    stationary_report: StationaryDict = {
        "pairs": [pair_dict(problem, i, pair) for i, pair in enumerate(found.pairs)],
        "groups": [list(group) for group in found.groups],
        "largest_index": found.largest_index,
        "nonpositive_rho_pairs": [
            pair_dict(problem, i, pair) for i, pair in enumerate(found.nonpositive_rho_pairs)
        ],
        "failed_starts": found.failed_starts,
    }

    duals: List[DualDict] = []
    theorem31 = None
    theorem32 = None
    oracle_report = None
    refutation = None
    hypotheses = None
    if found.pairs:
        hypotheses = dual.theorem32_hypotheses(problem, found)
        duals = [dual_dict(entry.index, entry.evaluation) for entry in hypotheses.pairs]
        verdict = certify.theorem31_verdict(problem,
                                            found,
                                            sampling,
                                            mode=certify.RELAXED if relaxed else certify.STRICT)
        theorem31 = {
            "certificate": certificate_dict(verdict.certificate),
            "designee": [{
                "x": to_list(pair.x),
                "rho": to_float(pair.rho)
            } for pair in verdict.designee],
            "designated": bool(verdict.designated),
            "designated_value": to_float(verdict.designated_value),
            "minimality_chain": {
                "convexified_slack": to_float(verdict.chain.convexified_slack),
                "shift_slack": to_float(verdict.chain.shift_slack),
                "holds": verdict.chain.holds,
            },
        }
        theorem32 = {
            "pairs": [{
                "index": entry.index,
                "det_nonzero": entry.det_nonzero,
                "curvature_positive": entry.curvature_positive,
                "inverse_form_negative": entry.evaluation.inverse_form is not None and
                entry.evaluation.inverse_form < 0.0,
                "scalar_condition": to_float(entry.scalar_condition),
                "failure": entry.failure,
            } for entry in hypotheses.pairs],
            "hold_for_all": hypotheses.hold_for_all,
            "designee_indices": list(hypotheses.designee_indices),
            "refuted": None,
        }
    else:
        logging.warning("No stationary pairs with positive multiplier were found")

    if n <= min(grid_spec.dimension_limit, oracle.DIMENSION_LIMIT):
        result = oracle.global_min_grid(problem, grid_spec)
        oracle_report = {
            "argmin": to_list(result.argmin),
            "min_value": to_float(result.min_value),
            "grid_resolution": to_float(result.grid_resolution),
            "points_evaluated": result.points_evaluated,
            "best_index": None,
            "designee_indices": [],
            "designee_matches": None,
            "oracle_consistent": None,
            "value_tol": value_tol,
        }
        if found.pairs:
            comparison = oracle.compare_candidates(problem, found, result, value_tol)
            oracle_report.update({
                "best_index": comparison.best_index,
                "designee_indices": list(comparison.designee_indices),
                "designee_matches": comparison.designee_matches,
                "oracle_consistent": comparison.oracle_consistent,
            })
            theorem32["refuted"] = hypotheses.hold_for_all and not comparison.designee_matches
            if comparison.refutation is not None:
                record = comparison.refutation
                refutation = {
                    "designee_index": record.designee_index,
                    "designee_x": to_list(record.designee_x),
                    "designee_rho": to_float(record.designee_rho),
                    "designee_value": to_float(record.designee_value),
                    "oracle_argmin": to_list(record.oracle_argmin),
                    "oracle_value": to_float(record.oracle_value),
                    "gap": to_float(record.gap),
                }
    else:
        logging.info("Skipping grid oracle for dimension %d", n)

    return {
        "problem": problem_dict(problem, name),
        "concavity": certificate_dict(concavity),
        "stationary": stationary_report,
        "dual": duals,
        "theorem31": theorem31,
        "theorem32": theorem32,
        "oracle": oracle_report,
        "refutation": refutation,
        "meta": {
            "seed": multistart.seed,
            "start_count": multistart.starts_for(n),
            "newton_tol": multistart.newton_tol,
            "sample_count": sampling.count_for(n),
            "sampling_radius": sampling.radius,
            "relaxed": relaxed,
            "points_per_axis": grid_spec.points_for(n) if oracle_report is not None else None,
        },
    }


def format_json(report) -> str:
    """Serialize a report; floats use the shortest repr that round-trips."""
    return json.dumps(report, indent=2)


def fmt(value) -> str:
    """Format a report value for text output, with 17 significant digits."""
    if value is None:
        return "-"
    if isinstance(value, bool):
        return str(value)
    if isinstance(value, float):
        return "%.17g" % value
    if isinstance(value, list):
        return "[" + ", ".join(fmt(v) for v in value) + "]"
    return str(value)


def format_text(report: AnalysisReport, elapsed: Optional[float] = None) -> str:
    """Human-readable form of an analysis report."""
    lines = []

    def add(label, value):
        lines.append("{0:30} {1}".format(label + ":", fmt(value)))

    problem = report["problem"]
    lines.append("Problem " + (problem["name"] or "(unnamed)"))
    add("Dimension", problem["dimension"])
    add("Degree", problem["degree"])

    lines.append("")
    lines.append("Strict concavity on the unit ball")
    concavity = report["concavity"]
    add("Verdict", concavity["verdict"])
    add("Max Hessian eigenvalue found", concavity["max_eigenvalue_found"])
    add("At", concavity["witness_point"])

    lines.append("")
    lines.append("Stationary pairs")
    stat = report["stationary"]
    for pair in stat["pairs"]:
        add("Pair {0} x".format(pair["index"]), pair["x"])
        add("Pair {0} rho".format(pair["index"]), pair["rho"])
        add("Pair {0} P(x)".format(pair["index"]), pair["value"])
    add("Groups", stat["groups"])
    add("Nonpositive multiplier roots", len(stat["nonpositive_rho_pairs"]))
    add("Failed starts", stat["failed_starts"])

    if report["dual"]:
        lines.append("")
        lines.append("Dual function at stationary pairs")
        for entry in report["dual"]:
            add("Pair {0} P_d".format(entry["index"]), entry["value"])
            add("Pair {0} P_d'".format(entry["index"]), entry["first_derivative"])
            add("Pair {0} P_d''".format(entry["index"]), entry["second_derivative"])
            add("Pair {0} det shifted Hessian".format(entry["index"]),
                entry["det_shifted_hessian"])

    theorem32 = report["theorem32"]
    if theorem32 is not None:
        lines.append("")
        lines.append("Dual curvature criterion hypotheses")
        for entry in theorem32["pairs"]:
            add("Pair {0}".format(entry["index"]), entry["failure"] or "hold")
            if entry["scalar_condition"] is not None:
                add("Pair {0} P'' + rho".format(entry["index"]), entry["scalar_condition"])
        add("Hold for all pairs", theorem32["hold_for_all"])
        add("Designee pairs", theorem32["designee_indices"])
        add("Criterion refuted", theorem32["refuted"])

    theorem31 = report["theorem31"]
    if theorem31 is not None:
        lines.append("")
        lines.append("Convexification certificate")
        certificate = theorem31["certificate"]
        add("Mode", certificate["mode"])
        add("rho", certificate["rho"])
        add("Verdict", certificate["verdict"])
        add("Min eigenvalue found", certificate["min_eigenvalue_found"])
        add("At", certificate["witness_point"])
        if certificate["exactness_reason"]:
            add("Exact because", certificate["exactness_reason"])
        add("Designated", theorem31["designated"])
        add("Designated value", theorem31["designated_value"])
        add("Minimality chain holds", theorem31["minimality_chain"]["holds"])

    oracle_report = report["oracle"]
    if oracle_report is not None:
        lines.append("")
        lines.append("Grid oracle")
        add("Min value", oracle_report["min_value"])
        add("Argmin", oracle_report["argmin"])
        add("Grid resolution", oracle_report["grid_resolution"])
        add("Designee matches", oracle_report["designee_matches"])

    refutation = report["refutation"]
    if refutation is not None:
        lines.append("")
        lines.append("Refutation: the largest multiplier pair is not a global minimizer")
        add("Designee x", refutation["designee_x"])
        add("Designee value", refutation["designee_value"])
        add("Oracle value", refutation["oracle_value"])
        add("Gap", refutation["gap"])

    lines.append("")
    meta = report["meta"]
    add("Seed", meta["seed"])
    add("Start count", meta["start_count"])
    if elapsed is not None:
        add("Elapsed seconds", "%.3f" % elapsed)
    return "\n".join(lines)


def failure_message(e: Exception) -> str:
    if isinstance(e, NumericalError):
        return "Numerical failure ({0}): {1}".format(e.kind, str(e))
    return str(e)
