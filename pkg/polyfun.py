"""Objective functions for the ball-constrained concave minimization problem.

This module holds the representation of the objective P, whose minimum over
the closed unit ball D = {x : ||x|| <= 1} the rest of the modules study. The
primary representation is a sparse multivariate polynomial with exact
differentiation, so that gradients and Hessians are reproducible bit for bit.
Any other twice continuously differentiable objective can be supplied through
`CallbackFunction`, which wraps user callables into the same interface.

Every objective exposes the following:

: **dimension** : Number of variables n.
: **degree** : Total degree for polynomials, or None if unknown. Objectives
    of degree 2 or less have a constant Hessian, which some of the
    certificate checks use to give exact rather than sampled verdicts.
: **value(x)** : Objective value at a point.
: **gradient(x)** : Gradient vector, length n.
: **hessian(x)** : Symmetric n by n matrix of second partials. The matrix is
    exactly symmetric as returned.

This module also holds the exception classes shared by the other modules and
the pivot-checked linear solve they all use, so that "numerically singular"
means the same thing everywhere.
"""

from functools import cached_property
import logging
import math
from typing import Callable, Dict, Iterable, NamedTuple, Optional, Sequence, Tuple, Union
import warnings

import numpy as np
import scipy.linalg
from typing_extensions import Protocol, runtime_checkable

# Central difference step for the finite difference oracles.
FD_STEP = 1e-5

# A matrix is declared numerically singular when the smallest pivot of its LU
# factorization is below this fraction of its infinity norm.
SINGULAR_PIVOT_RTOL = 1e-12

# Number of evaluation points processed at once by vectorized evaluation.
EVAL_CHUNK = 1 << 16

ArrayLike = Union[Sequence[float], np.ndarray, float]


class DualityError(Exception):
    """Base class for errors raised by the ball duality modules."""


class InvalidInputError(DualityError, ValueError):
    """Provides error info when input violates a documented precondition."""


class NumericalError(DualityError):
    """Provides error info when a numerical procedure failed.

    Attributes:
        kind (str): What went wrong. One of "singular" (a Newton Jacobian
            could not be solved), "diverged" (an iteration did not converge
            or produced non-finite values), or "singular-shifted-hessian"
            (the matrix Hessian + rho * I is numerically singular).
    """
    def __init__(self, kind: str, msg: str, *args):
        super().__init__(msg, *args)
        self.kind = kind


class Monomial(NamedTuple):
    """One term coeff * prod(x_j ** powers[j]) of a polynomial."""

    coeff: float
    powers: Tuple[int, ...]


@runtime_checkable
class SmoothFunction(Protocol):
    """The C2 objective interface consumed by the other modules."""

    dimension: int
    degree: Optional[int]

    def value(self, x: np.ndarray) -> float:
        ...

    def gradient(self, x: np.ndarray) -> np.ndarray:
        ...

    def hessian(self, x: np.ndarray) -> np.ndarray:
        ...


def check_point(f, x: ArrayLike) -> np.ndarray:
    """Return x as a float vector, checking it against f's dimension.

    Raises:
        InvalidInputError: x does not have f.dimension components.
    """
    point = np.atleast_1d(np.asarray(x, dtype=float))
    if point.ndim != 1 or point.shape[0] != f.dimension:
        raise InvalidInputError("Point has shape {0}, expected ({1},)".format(
            point.shape, f.dimension))
    return point


def solve_checked(matrix: np.ndarray, rhs: np.ndarray, kind: str = "singular") -> np.ndarray:
    """Solve matrix @ y = rhs with partial pivoting, refusing singular systems.

    Args:
        matrix: Square matrix.
        rhs: Right hand side vector.
        kind (str): The `NumericalError.kind` to use if the matrix turns out
            to be singular.

    Returns:
        The solution vector y.

    Raises:
        NumericalError: The smallest LU pivot magnitude is below
            SINGULAR_PIVOT_RTOL times the infinity norm of the matrix, or the
            matrix has non-finite entries.
    """
    matrix = np.asarray(matrix, dtype=float)
    scale = np.linalg.norm(matrix, np.inf)
    if not math.isfinite(scale):
        raise NumericalError(kind, "Matrix has non-finite entries")
    if scale == 0.0:
        raise NumericalError(kind, "Matrix is identically zero")
    with warnings.catch_warnings():
        # exact zero pivots are reported below, no need for scipy to warn too
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(matrix, check_finite=False)
    pivot = float(np.min(np.abs(np.diag(lu))))
    if pivot < SINGULAR_PIVOT_RTOL * scale:
        raise NumericalError(
            kind, "Matrix is numerically singular (pivot {0:.3g}, norm {1:.3g})".format(
                pivot, scale))
    return scipy.linalg.lu_solve((lu, piv), np.asarray(rhs, dtype=float), check_finite=False)


class PolynomialFunction:
    """A sparse multivariate polynomial in `dimension` variables.

    Terms are kept in canonical form: sorted lexicographically by powers,
    with duplicate powers merged by summing coefficients and zero
    coefficients dropped. Two polynomials with the same dimension and
    canonical terms compare equal.

    Instances are not meant to be modified after construction. Derivative
    polynomials are built on first use and cached.
    """
    def __init__(self, dimension: int, terms: Iterable[Union[Monomial, Tuple[float,
                                                                           Sequence[int]]]] = ()):
        if isinstance(dimension, bool) or not isinstance(dimension, (int, np.integer)):
            raise InvalidInputError("Dimension must be an integer")
        if dimension < 1:
            raise InvalidInputError("Dimension must be positive, got {0}".format(dimension))
        self.dimension = int(dimension)

        merged: Dict[Tuple[int, ...], float] = {}
        for coeff, powers in terms:
            coeff = float(coeff)
            if not math.isfinite(coeff):
                raise InvalidInputError("Non-finite coefficient {0}".format(coeff))
            powers = tuple(int(p) for p in powers)
            if len(powers) != self.dimension:
                raise InvalidInputError("Exponent vector {0} does not have length {1}".format(
                    list(powers), self.dimension))
            if any(p < 0 for p in powers):
                raise InvalidInputError("Negative exponent in {0}".format(list(powers)))
            merged[powers] = merged.get(powers, 0.0) + coeff

        self.terms: Tuple[Monomial, ...] = tuple(
            Monomial(coeff, powers) for powers, coeff in sorted(merged.items()) if coeff != 0.0)
        self._coeffs = np.array([term.coeff for term in self.terms], dtype=float)
        self._powers = np.array([term.powers for term in self.terms],
                                dtype=np.int64).reshape(len(self.terms), self.dimension)

    @property
    def degree(self) -> int:
        """Total degree; the zero polynomial has degree 0."""
        return max((sum(term.powers) for term in self.terms), default=0)

    @property
    def is_even(self) -> bool:
        """True if P(x) = P(-x) term by term."""
        return all(sum(term.powers) % 2 == 0 for term in self.terms)

    def value(self, x: ArrayLike) -> float:
        point = check_point(self, x)
        if not self.terms:
            return 0.0
        return float(np.prod(np.power(point, self._powers), axis=1) @ self._coeffs)

    def values(self, points: np.ndarray) -> np.ndarray:
        """Evaluate at every row of an (m, n) array of points."""
        points = np.asarray(points, dtype=float)
        if points.ndim != 2 or points.shape[1] != self.dimension:
            raise InvalidInputError("Points have shape {0}, expected (m, {1})".format(
                points.shape, self.dimension))
        result = np.zeros(points.shape[0])
        for coeff, powers in self.terms:
            column = np.full(points.shape[0], coeff)
            for j, power in enumerate(powers):
                if power:
                    column *= points[:, j]**power
            result += column
        return result

    def differentiate(self, var_index: int) -> "PolynomialFunction":
        """Return the partial derivative with respect to variable var_index.

        Raises:
            InvalidInputError: var_index is out of range.
        """
        if not 0 <= var_index < self.dimension:
            raise InvalidInputError("Variable index {0} out of range for dimension {1}".format(
                var_index, self.dimension))
        terms = []
        for coeff, powers in self.terms:
            power = powers[var_index]
            if power:
                lowered = powers[:var_index] + (power - 1, ) + powers[var_index + 1:]
                terms.append((coeff * power, lowered))
        return PolynomialFunction(self.dimension, terms)

    @cached_property
    def _gradient_polys(self) -> Tuple["PolynomialFunction", ...]:
        return tuple(self.differentiate(i) for i in range(self.dimension))

    @cached_property
    def _hessian_polys(self) -> Dict[Tuple[int, int], "PolynomialFunction"]:
        return {(i, j): self._gradient_polys[i].differentiate(j)
                for i in range(self.dimension) for j in range(i, self.dimension)}

    def gradient(self, x: ArrayLike) -> np.ndarray:
        point = check_point(self, x)
        return np.array([poly.value(point) for poly in self._gradient_polys])

    def hessian(self, x: ArrayLike) -> np.ndarray:
        point = check_point(self, x)
        n = self.dimension
        matrix = np.empty((n, n))
        for (i, j), poly in self._hessian_polys.items():
            matrix[i, j] = matrix[j, i] = poly.value(point)
        return matrix

    def hessians(self, points: np.ndarray) -> np.ndarray:
        """Return the (m, n, n) stack of Hessians at every row of points."""
        points = np.asarray(points, dtype=float)
        n = self.dimension
        stack = np.empty((points.shape[0], n, n))
        for (i, j), poly in self._hessian_polys.items():
            stack[:, i, j] = stack[:, j, i] = poly.values(points)
        return stack

    def scaled(self, alpha: float) -> "PolynomialFunction":
        return PolynomialFunction(self.dimension,
                                  ((alpha * coeff, powers) for coeff, powers in self.terms))

    def __neg__(self) -> "PolynomialFunction":
        return self.scaled(-1.0)

    def __add__(self, other: "PolynomialFunction") -> "PolynomialFunction":
        if not isinstance(other, PolynomialFunction):
            return NotImplemented
        if other.dimension != self.dimension:
            raise InvalidInputError("Cannot add polynomials of dimension {0} and {1}".format(
                self.dimension, other.dimension))
        return PolynomialFunction(self.dimension, self.terms + other.terms)

    def __sub__(self, other: "PolynomialFunction") -> "PolynomialFunction":
        if not isinstance(other, PolynomialFunction):
            return NotImplemented
        return self + (-other)

    def __eq__(self, other) -> bool:
        if not isinstance(other, PolynomialFunction):
            return NotImplemented
        return self.dimension == other.dimension and self.terms == other.terms

    __hash__ = None  # type: ignore

    def __repr__(self) -> str:
        return "PolynomialFunction({0}, {1})".format(
            self.dimension, [(coeff, list(powers)) for coeff, powers in self.terms])


class CallbackFunction:
    """Adapt user supplied callables to the objective interface.

    The Hessian callback result is symmetrized, so `hessian` is exactly
    symmetric as returned even if the callable is slightly off. No automatic
    differentiation is done; use `fd_gradient` and `fd_hessian` to check the
    callables against each other.
    """
    def __init__(self,
                 dimension: int,
                 value: Callable[[np.ndarray], float],
                 gradient: Callable[[np.ndarray], ArrayLike],
                 hessian: Callable[[np.ndarray], ArrayLike],
                 degree: Optional[int] = None):
        if dimension < 1:
            raise InvalidInputError("Dimension must be positive, got {0}".format(dimension))
        self.dimension = int(dimension)
        self.degree = degree
        self._value = value
        self._gradient = gradient
        self._hessian = hessian

    def value(self, x: ArrayLike) -> float:
        return float(self._value(check_point(self, x)))

    def gradient(self, x: ArrayLike) -> np.ndarray:
        grad = np.atleast_1d(np.asarray(self._gradient(check_point(self, x)), dtype=float))
        if grad.shape != (self.dimension, ):
            raise InvalidInputError("Gradient callback returned shape {0}".format(grad.shape))
        return grad

    def hessian(self, x: ArrayLike) -> np.ndarray:
        matrix = np.asarray(self._hessian(check_point(self, x)), dtype=float)
        matrix = matrix.reshape(self.dimension, self.dimension)
        return 0.5 * (matrix + matrix.T)


def hessian_stack(f, points: np.ndarray) -> np.ndarray:
    """Return the (m, n, n) Hessians of f at every row of points."""
    if isinstance(f, PolynomialFunction):
        return f.hessians(points)
    return np.array([f.hessian(point) for point in points]).reshape(-1, f.dimension, f.dimension)


def value_stack(f, points: np.ndarray) -> np.ndarray:
    """Return the values of f at every row of points."""
    if isinstance(f, PolynomialFunction):
        return f.values(points)
    return np.array([f.value(point) for point in points], dtype=float)


def evaluate(f, x: ArrayLike) -> float:
    """Return the objective value of f at x.

    Raises:
        InvalidInputError: Dimension mismatch.
    """
    return f.value(check_point(f, x))


def differentiate(f: PolynomialFunction, var_index: int) -> PolynomialFunction:
    """Return the exact partial derivative of a polynomial."""
    return f.differentiate(var_index)


def gradient(f, x: ArrayLike) -> np.ndarray:
    """Return the gradient of f at x; exact for polynomials."""
    return f.gradient(check_point(f, x))


def hessian(f, x: ArrayLike) -> np.ndarray:
    """Return the symmetric Hessian of f at x; exact for polynomials."""
    return f.hessian(check_point(f, x))


def fd_gradient(f, x: ArrayLike, h: float = FD_STEP) -> np.ndarray:
    """Central finite difference approximation of the gradient.

    Only meant for validating exact or user supplied derivatives.

    Raises:
        InvalidInputError: h is not positive, or dimension mismatch.
    """
    if not h > 0.0:
        raise InvalidInputError("Finite difference step must be positive")
    point = check_point(f, x)
    result = np.empty(f.dimension)
    for i in range(f.dimension):
        offset = np.zeros(f.dimension)
        offset[i] = h
        result[i] = (f.value(point + offset) - f.value(point - offset)) / (2.0 * h)
    return result


def fd_hessian(f, x: ArrayLike, h: float = FD_STEP) -> np.ndarray:
    """Central finite difference approximation of the Hessian.

    Differences the gradient rather than the value, which keeps rounding
    error at the level of the gradient check. The result is symmetrized.

    Raises:
        InvalidInputError: h is not positive, or dimension mismatch.
    """
    if not h > 0.0:
        raise InvalidInputError("Finite difference step must be positive")
    point = check_point(f, x)
    columns = np.empty((f.dimension, f.dimension))
    for j in range(f.dimension):
        offset = np.zeros(f.dimension)
        offset[j] = h
        columns[:, j] = (f.gradient(point + offset) - f.gradient(point - offset)) / (2.0 * h)
    logging.debug("FD Hessian asymmetry at %s: %.3g", point,
                  float(np.max(np.abs(columns - columns.T))))
    return 0.5 * (columns + columns.T)
