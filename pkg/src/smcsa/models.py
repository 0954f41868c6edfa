"""Regression models and loss functions.

Two model families are provided: low-order rational functions
r(x) = p1(x)/p2(x) with p2(0) = 1, and B-spline expansions on equidistant
knots.  Losses are plain squared error and the bounded Tukey biweight for
outlier-resistant fits.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .constraints import poly_eval


class PoleError(ArithmeticError):
    """Rational model evaluated where its denominator vanishes."""


class DomainError(ValueError):
    """Spline evaluated outside the valid interval of its basis."""


class SingularDesignError(ValueError):
    """Least-squares design is rank deficient or numerically singular."""

    def __init__(self, message: str, condition: float = float("inf")):
        super().__init__(f"{message} (condition estimate {condition:.3e})")
        self.condition = condition


@dataclass(frozen=True)
class Dataset:
    """Paired observations with axis labels for reporting."""

    x: np.ndarray
    y: np.ndarray
    name: str = ""
    x_label: str = "x"
    y_label: str = "y"

    def __post_init__(self):
        x = np.asarray(self.x, dtype=float)
        y = np.asarray(self.y, dtype=float)
        if x.ndim != 1 or y.ndim != 1 or x.size != y.size:
            raise ValueError("x and y must be one-dimensional and equally long")
        if x.size == 0:
            raise ValueError("dataset is empty")
        if not (np.all(np.isfinite(x)) and np.all(np.isfinite(y))):
            raise ValueError("dataset contains non-finite values")
        object.__setattr__(self, "x", x)
        object.__setattr__(self, "y", y)

    @property
    def n(self) -> int:
        return self.x.size


@dataclass(frozen=True)
class LossSpec:
    """Which residual aggregation the loss uses.

    kind is "squared_error" or "tukey"; c is the biweight clipping
    constant and is ignored for squared error.
    """

    kind: str = "squared_error"
    c: float = 1.0

    def __post_init__(self):
        if self.kind not in ("squared_error", "tukey"):
            raise ValueError(f"unknown loss kind {self.kind!r}")
        if not self.c > 0:
            raise ValueError("c must be positive")


@dataclass(frozen=True)
class RationalModel:
    """r(x) = (b1 + b2 x + ... ) / (1 + b_{m+2} x + ...).

    The parameter vector stacks the numerator coefficients (constant term
    first) followed by the denominator coefficients beyond the leading 1.
    """

    numer_degree: int = 2
    denom_degree: int = 2

    def __post_init__(self):
        if self.numer_degree < 0 or self.denom_degree < 0:
            raise ValueError("degrees must be non-negative")

    @property
    def n_parameters(self) -> int:
        return self.numer_degree + self.denom_degree + 1

    def numer_coeffs(self, theta) -> np.ndarray:
        theta = self._check(theta)
        return theta[: self.numer_degree + 1]

    def denom_coeffs(self, theta) -> np.ndarray:
        theta = self._check(theta)
        return np.concatenate(([1.0], theta[self.numer_degree + 1:]))

    def _check(self, theta) -> np.ndarray:
        theta = np.asarray(theta, dtype=float)
        if theta.shape != (self.n_parameters,):
            raise ValueError(
                f"expected {self.n_parameters} parameters, got shape {theta.shape}")
        return theta


def rational_eval(model: RationalModel, theta, x):
    """Evaluate the rational model at scalar or array x.

    Raises PoleError when the denominator comes within 1e-300 of zero at
    any evaluation point.
    """
    numer = poly_eval(model.numer_coeffs(theta), x)
    denom = poly_eval(model.denom_coeffs(theta), x)
    if np.ndim(x) == 0:
        if abs(denom) < 1e-300:
            raise PoleError(f"denominator vanishes at x = {x}")
        return numer / denom
    if np.min(np.abs(denom)) < 1e-300:
        raise PoleError("denominator vanishes at an evaluation point")
    return numer / denom


@dataclass(frozen=True)
class BSplineBasis:
    """B-spline basis of a fixed degree on strictly increasing equidistant knots.

    With knots k_1 < ... < k_{J+d+1} (spacing h) the basis holds J = count
    - degree - 1 functions; partition of unity and the derivative identity
    hold on the valid interval [k_{d+1}, k_{J+1}].  Degree-zero pieces are
    indicators of [k_j, k_{j+1}), closed on the right for the final knot
    interval so the last basis function reaches the endpoint.
    """

    degree: int
    knots: np.ndarray

    def __post_init__(self):
        if self.degree < 0:
            raise ValueError("degree must be non-negative")
        knots = np.asarray(self.knots, dtype=float)
        if knots.ndim != 1 or knots.size < self.degree + 2:
            raise ValueError("need at least degree + 2 knots")
        if not np.all(np.isfinite(knots)):
            raise ValueError("knots must be finite")
        gaps = np.diff(knots)
        if np.any(gaps <= 0):
            raise ValueError("knots must be strictly increasing")
        h = float(gaps[0])
        if np.max(np.abs(gaps - h)) > 1e-12 * max(1.0, abs(h)):
            raise ValueError("knots must be equidistant")
        object.__setattr__(self, "knots", knots)

    @classmethod
    def covering(cls, lo: float, hi: float, n_knots: int = 10, degree: int = 2) -> "BSplineBasis":
        """Equidistant knots whose valid interval is exactly [lo, hi].

        The knot range extends degree * h beyond each side of [lo, hi],
        where h divides [lo, hi] into n_knots - 2*degree - 1 pieces.
        """
        if not lo < hi:
            raise ValueError("need lo < hi")
        inner = n_knots - 2 * degree - 1
        if inner < 1:
            raise ValueError("too few knots for this degree")
        h = (hi - lo) / inner
        knots = lo + (np.arange(n_knots) - degree) * h
        return cls(degree=degree, knots=knots)

    @property
    def n_basis(self) -> int:
        return self.knots.size - self.degree - 1

    @property
    def spacing(self) -> float:
        return float(self.knots[1] - self.knots[0])

    @property
    def valid_interval(self) -> tuple:
        return (float(self.knots[self.degree]), float(self.knots[self.n_basis]))


def _piecewise_constant(knots: np.ndarray, i: int, x: np.ndarray) -> np.ndarray:
    # Indicator of [k_i, k_{i+1}), 1-based i; the final interval is closed.
    left = knots[i - 1]
    right = knots[i]
    if i == knots.size - 1:
        return ((x >= left) & (x <= right)).astype(float)
    return ((x >= left) & (x < right)).astype(float)


def _basis_recursive(knots: np.ndarray, h: float, j: int, d: int, x: np.ndarray) -> np.ndarray:
    if d == 0:
        return _piecewise_constant(knots, j, x)
    hd = h * d
    lower = _basis_recursive(knots, h, j, d - 1, x)
    upper = _basis_recursive(knots, h, j + 1, d - 1, x)
    return ((x - knots[j - 1]) / hd) * lower + ((knots[j + d] - x) / hd) * upper


def _check_domain(basis: BSplineBasis, x: np.ndarray):
    lo, hi = basis.valid_interval
    if np.any(x < lo) or np.any(x > hi):
        raise DomainError(f"x outside the valid interval [{lo}, {hi}]")


def _check_index(basis: BSplineBasis, j: int):
    if not 1 <= j <= basis.n_basis:
        raise ValueError(f"basis index must lie in [1, {basis.n_basis}], got {j}")


def bspline_basis(basis: BSplineBasis, j: int, x):
    """Value of the j-th (1-based) basis function at scalar or array x."""
    _check_index(basis, j)
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(basis, xs)
    out = _basis_recursive(basis.knots, basis.spacing, j, basis.degree, xs)
    return float(out[0]) if scalar else out


def bspline_basis_derivative(basis: BSplineBasis, j: int, x):
    """Derivative of the j-th basis function: (B_j^{d-1} - B_{j+1}^{d-1}) / h."""
    if basis.degree < 1:
        raise ValueError("derivative needs degree >= 1")
    _check_index(basis, j)
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(basis, xs)
    lower = _basis_recursive(basis.knots, basis.spacing, j, basis.degree - 1, xs)
    upper = _basis_recursive(basis.knots, basis.spacing, j + 1, basis.degree - 1, xs)
    out = (lower - upper) / basis.spacing
    return float(out[0]) if scalar else out


def design_matrix(basis: BSplineBasis, x) -> np.ndarray:
    """n-by-J matrix of basis values at the data points."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(basis, xs)
    cols = [_basis_recursive(basis.knots, basis.spacing, j, basis.degree, xs)
            for j in range(1, basis.n_basis + 1)]
    return np.column_stack(cols)


def spline_value(basis: BSplineBasis, coeffs, x):
    """Value of the spline sum_j coeffs[j] B_j at scalar or array x."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n_basis,):
        raise ValueError(f"expected {basis.n_basis} coefficients")
    scalar = np.ndim(x) == 0
    out = design_matrix(basis, x) @ coeffs
    return float(out[0]) if scalar else out


def spline_derivative(basis: BSplineBasis, coeffs, x):
    """Spline derivative via coefficient differences.

    Equals (1/h) sum_{j>=2} (coeffs[j] - coeffs[j-1]) B_j^{d-1}(x); valid
    for degree >= 1 on the open valid interval (exact up to the boundary
    here since the basis recursion is evaluated one-sidedly).
    """
    if basis.degree < 1:
        raise ValueError("derivative needs degree >= 1")
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape != (basis.n_basis,):
        raise ValueError(f"expected {basis.n_basis} coefficients")
    scalar = np.ndim(x) == 0
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    _check_domain(basis, xs)
    acc = np.zeros_like(xs)
    for j in range(2, basis.n_basis + 1):
        diff = coeffs[j - 1] - coeffs[j - 2]
        if diff != 0.0:
            acc += diff * _basis_recursive(basis.knots, basis.spacing, j, basis.degree - 1, xs)
    acc /= basis.spacing
    return float(acc[0]) if scalar else acc


def tukey_biweight(u, c: float = 1.0):
    """Tukey's biweight rho: bounded at c*c/6 for |u| >= c.

    rho(u) = (c^2/6) * (1 - (1 - (u/c)^2)^3) inside the clipping constant.
    """
    if not c > 0:
        raise ValueError("c must be positive")
    scalar = np.ndim(u) == 0
    scaled = np.minimum(np.abs(np.atleast_1d(np.asarray(u, dtype=float))) / c, 1.0)
    out = (c * c / 6.0) * (1.0 - (1.0 - scaled * scaled) ** 3)
    return float(out[0]) if scalar else out


def loss(predict, theta, data: Dataset, spec: LossSpec = LossSpec()) -> float:
    """Aggregate residual loss of a prediction function at theta.

    predict(theta, x_array) must return fitted values aligned with data.y.
    """
    resid = data.y - predict(theta, data.x)
    if spec.kind == "squared_error":
        return float(resid @ resid)
    return float(np.sum(tukey_biweight(resid, spec.c)))


def ols_estimate(design, y) -> np.ndarray:
    """Least-squares coefficients through an orthogonal decomposition.

    Raises SingularDesignError when the design is rank deficient
    (condition number above 1e12).
    """
    a = np.asarray(design, dtype=float)
    yv = np.asarray(y, dtype=float)
    if a.ndim != 2 or yv.ndim != 1 or a.shape[0] != yv.size:
        raise ValueError("design must be 2-d with rows matching y")
    if a.shape[0] < a.shape[1]:
        raise SingularDesignError("fewer rows than columns")
    u, s, vt = np.linalg.svd(a, full_matrices=False)
    if s[0] == 0.0:
        raise SingularDesignError("design is identically zero")
    condition = float(s[0] / s[-1]) if s[-1] > 0 else float("inf")
    if condition > 1e12:
        raise SingularDesignError("design is rank deficient", condition)
    return vt.T @ ((u.T @ yv) / s)


def rational_crude_estimate(data: Dataset, model: RationalModel = RationalModel()) -> np.ndarray:
    """Starting guess for the rational model by linear rearrangement.

    Multiplying y = p1(x)/p2(x) through by p2 and moving the denominator
    terms to the regressor side gives an ordinary regression of y on
    (1, x, ..., x^m, -x y, ..., -x^w y), whose coefficients line up with
    the model's parameter vector.
    """
    x = data.x
    y = data.y
    cols = [x ** p for p in range(model.numer_degree + 1)]
    cols += [-(x ** p) * y for p in range(1, model.denom_degree + 1)]
    design = np.column_stack(cols)
    return ols_estimate(design, y)
