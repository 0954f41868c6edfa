"""Feasibility indicators for shape-constrained regression.

Monotonicity of a fitted curve is decided exactly from the model
coefficients rather than by sampling the curve on a grid.  For rational
functions this reduces to root finding: r = p1/p2 is non-decreasing on an
interval iff p2 has no real root there and q = p1'p2 - p1 p2' is
non-negative on the whole interval.  For B-spline expansions with
equidistant knots it reduces to an ordering of the coefficient vector.

Polynomials are represented by ascending coefficient arrays
(c[i] multiplies x**i).  The zero polynomial is an empty array; trailing
zero coefficients are ignored.  Root finding goes through the companion
matrix, so results carry the usual eigenvalue-level accuracy: simple and
double roots are resolved reliably, clusters of higher multiplicity may
split beyond the tolerance.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

INCREASING = "increasing"
DECREASING = "decreasing"
_DIRECTIONS = (INCREASING, DECREASING)

DEFAULT_ROOT_TOL = 1e-6


@dataclass(frozen=True)
class Interval:
    """Closed bounded interval [lo, hi] with lo < hi."""

    lo: float
    hi: float

    def __post_init__(self):
        lo = float(self.lo)
        hi = float(self.hi)
        if not (np.isfinite(lo) and np.isfinite(hi)):
            raise ValueError("interval endpoints must be finite")
        if not lo < hi:
            raise ValueError(f"interval requires lo < hi, got [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def contains(self, x) -> bool:
        return bool(self.lo <= x <= self.hi)


@dataclass(frozen=True)
class RootReport:
    """Real roots found in an interval, as (location, multiplicity) pairs.

    Locations are strictly increasing; multiplicity counts eigenvalues that
    clustered within the tolerance used by :func:`real_roots_in_interval`.
    """

    roots: tuple

    def __post_init__(self):
        locs = [loc for loc, _ in self.roots]
        if any(b <= a for a, b in zip(locs, locs[1:])):
            raise ValueError("root locations must be strictly increasing")
        if any(mult < 1 for _, mult in self.roots):
            raise ValueError("multiplicities must be positive")

    @property
    def is_empty(self) -> bool:
        return not self.roots

    def locations(self):
        return [loc for loc, _ in self.roots]

    def total_multiplicity(self) -> int:
        return sum(mult for _, mult in self.roots)


def _check_direction(direction: str) -> str:
    if direction not in _DIRECTIONS:
        raise ValueError(f"direction must be one of {_DIRECTIONS}, got {direction!r}")
    return direction


_EMPTY = np.empty(0)


def _trim(c: np.ndarray) -> np.ndarray:
    # Validation-free trim for internal hot paths; c is a finite 1-d array.
    n = c.size
    while n > 0 and c[n - 1] == 0.0:
        n -= 1
    return c[:n]


def poly_trim(coeffs) -> np.ndarray:
    """Drop trailing zero coefficients; the zero polynomial becomes empty."""
    c = np.asarray(coeffs, dtype=float)
    if c.ndim != 1:
        raise ValueError("coefficients must be one-dimensional")
    if not np.all(np.isfinite(c)):
        raise ValueError("coefficients must be finite")
    return _trim(c)


def poly_eval(coeffs, x):
    """Evaluate a polynomial by Horner's rule at a scalar or array x."""
    c = np.asarray(coeffs, dtype=float)
    if np.ndim(x) == 0:
        acc = 0.0
        for ci in c[::-1]:
            acc = acc * x + ci
        return float(acc)
    xs = np.asarray(x, dtype=float)
    acc = np.zeros_like(xs)
    for ci in c[::-1]:
        acc *= xs
        acc += ci
    return acc


def _der(c: np.ndarray) -> np.ndarray:
    # c trimmed; the result needs no trim since (size-1) * c[-1] != 0.
    if c.size <= 1:
        return _EMPTY
    return c[1:] * np.arange(1, c.size)


def poly_derivative(coeffs) -> np.ndarray:
    return _der(poly_trim(coeffs))


def _mul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    # a, b trimmed; the product of nonzero leading coefficients is nonzero.
    if a.size == 0 or b.size == 0:
        return _EMPTY
    return np.convolve(a, b)


def _sub(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = max(a.size, b.size)
    out = np.zeros(n)
    out[: a.size] = a
    out[: b.size] -= b
    return _trim(out)


def poly_mul(a, b) -> np.ndarray:
    return _mul(poly_trim(a), poly_trim(b))


def poly_sub(a, b) -> np.ndarray:
    return _sub(poly_trim(a), poly_trim(b))


def _roots_of(c: np.ndarray) -> np.ndarray:
    # c trimmed, size >= 1: complex eigenvalues of the companion matrix.
    n = c.size - 1
    if n == 0:
        return np.empty(0, dtype=complex)
    m = np.zeros((n, n))
    m[1:, :-1] = np.eye(n - 1)
    m[:, -1] = -c[:-1] / c[-1]
    return np.linalg.eigvals(m)


def poly_roots(coeffs) -> np.ndarray:
    """All complex roots, as eigenvalues of the companion matrix."""
    c = poly_trim(coeffs)
    if c.size == 0:
        raise ValueError("the zero polynomial has no well-defined roots")
    return _roots_of(c)


def _cluster(rts: np.ndarray, interval: Interval, tol: float) -> tuple:
    # (location, multiplicity) pairs for near-real eigenvalues inside the
    # interval; real parts within tol of each other merge into one root.
    if rts.size == 0:
        return ()
    re = rts.real[np.abs(rts.imag) < tol]
    re = re[(re >= interval.lo) & (re <= interval.hi)]
    if re.size == 0:
        return ()
    re.sort()
    clusters = []
    total = re[0]
    count = 1
    last = re[0]
    for r in re[1:]:
        if r - last <= tol:
            total += r
            count += 1
        else:
            clusters.append((total / count, count))
            total = r
            count = 1
        last = r
    clusters.append((total / count, count))
    return tuple(clusters)


def real_roots_in_interval(coeffs, interval: Interval, tol: float = DEFAULT_ROOT_TOL) -> RootReport:
    """Real roots inside a closed interval, clustered into multiplicities.

    An eigenvalue counts as real when its imaginary part is below tol in
    magnitude.  Real parts within tol of each other merge into one root
    whose location is the cluster mean and whose multiplicity is the
    cluster size.  Raises ValueError for the zero polynomial.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    return RootReport(_cluster(poly_roots(coeffs), interval, tol))


def _probe_point(interval: Interval, locations) -> float:
    # Midpoint of the widest root-free subinterval: the safest spot to read
    # off the sign away from every root.
    edges = [interval.lo] + list(locations) + [interval.hi]
    widths = [b - a for a, b in zip(edges, edges[1:])]
    i = int(np.argmax(widths))
    return 0.5 * (edges[i] + edges[i + 1])


def _nonneg(c: np.ndarray, interval: Interval, tol: float) -> bool:
    # c trimmed, tol validated.
    if c.size == 0:
        return True
    if c.size == 1:
        return bool(c[0] > -tol)
    clusters = _cluster(_roots_of(c), interval, tol)
    if any(mult % 2 == 1 for _, mult in clusters):
        return False
    probe = _probe_point(interval, [loc for loc, _ in clusters])
    return bool(poly_eval(c, probe) > -tol)


def is_nonnegative_on(coeffs, interval: Interval, tol: float = DEFAULT_ROOT_TOL) -> bool:
    """Decide p(x) >= 0 for all x in the interval.

    True iff every real root inside the interval has even multiplicity and
    the polynomial is positive (above -tol) at a probe point taken in the
    widest root-free subinterval.  The zero polynomial returns True.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    return _nonneg(poly_trim(coeffs), interval, tol)


def has_no_roots_in(coeffs, interval: Interval, tol: float = DEFAULT_ROOT_TOL) -> bool:
    """True iff the polynomial has no real root inside the closed interval."""
    return real_roots_in_interval(coeffs, interval, tol).is_empty


def rational_monotone_indicator(numer, denom, interval: Interval,
                                direction: str = INCREASING,
                                tol: float = DEFAULT_ROOT_TOL) -> bool:
    """Feasibility of monotonicity for the rational function p1/p2.

    Checks that the denominator has no real root in the interval (so the
    curve has no pole there) and that q = p1'p2 - p1 p2' keeps the sign
    required by the direction over the whole interval.  Raises ValueError
    when the denominator is the zero polynomial.
    """
    _check_direction(direction)
    if tol <= 0:
        raise ValueError("tol must be positive")
    p2 = poly_trim(denom)
    if p2.size == 0:
        raise ValueError("denominator is the zero polynomial")
    # Pole check first: it is cheaper than building q and rejects early.
    if p2.size > 1 and _cluster(_roots_of(p2), interval, tol):
        return False
    p1 = poly_trim(numer)
    q = _sub(_mul(_der(p1), p2), _mul(p1, _der(p2)))
    if direction == DECREASING:
        q = -q
    return _nonneg(q, interval, tol)


def bspline_monotone_indicator(coeffs, direction: str = DECREASING) -> bool:
    """Feasibility of monotonicity for an equidistant-knot spline expansion.

    The spline derivative is a non-negative combination of lower-degree
    basis functions scaled by consecutive coefficient differences, so the
    curve is non-decreasing iff the coefficients are non-decreasing, and
    non-increasing iff they are non-increasing.
    """
    _check_direction(direction)
    b = np.asarray(coeffs, dtype=float)
    if b.ndim != 1 or b.size < 2:
        raise ValueError("need a coefficient vector of length at least 2")
    d = np.diff(b)
    if direction == INCREASING:
        return bool(np.all(d >= 0.0))
    return bool(np.all(d <= 0.0))


def bspline_monotone_batch(coeffs, direction: str = DECREASING) -> np.ndarray:
    """Row-wise vectorisation of bspline_monotone_indicator."""
    _check_direction(direction)
    b = np.asarray(coeffs, dtype=float)
    if b.ndim != 2 or b.shape[1] < 2:
        raise ValueError("need a matrix with at least two columns")
    d = np.diff(b, axis=1)
    if direction == INCREASING:
        return np.all(d >= 0.0, axis=1)
    return np.all(d <= 0.0, axis=1)
