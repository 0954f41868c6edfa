"""Model families, loss functions, and linear estimators."""

import numpy as np
import pytest
from scipy.interpolate import BSpline

from smcsa.models import (
    BSplineBasis,
    Dataset,
    DomainError,
    LossSpec,
    PoleError,
    RationalModel,
    SingularDesignError,
    bspline_basis,
    bspline_basis_derivative,
    design_matrix,
    loss,
    ols_estimate,
    rational_crude_estimate,
    rational_eval,
    spline_derivative,
    spline_value,
    tukey_biweight,
)


class TestDataset:
    def test_basic_properties(self):
        d = Dataset([0.0, 1.0], [2.0, 3.0], name="toy")
        assert d.n == 2
        assert d.x.dtype == float

    def test_validation(self):
        with pytest.raises(ValueError):
            Dataset([0.0, 1.0], [2.0])
        with pytest.raises(ValueError):
            Dataset([], [])
        with pytest.raises(ValueError):
            Dataset([0.0], [float("nan")])
        with pytest.raises(ValueError):
            Dataset([[0.0]], [[1.0]])


class TestLossSpec:
    def test_validation(self):
        with pytest.raises(ValueError):
            LossSpec("absolute")
        with pytest.raises(ValueError):
            LossSpec("tukey", c=0.0)


class TestRationalModel:
    def test_parameter_packing(self):
        m = RationalModel(2, 2)
        theta = np.array([1.0, 2.0, 3.0, 4.0, 5.0])
        assert m.n_parameters == 5
        assert m.numer_coeffs(theta).tolist() == [1.0, 2.0, 3.0]
        assert m.denom_coeffs(theta).tolist() == [1.0, 4.0, 5.0]

    def test_shape_check(self):
        with pytest.raises(ValueError):
            RationalModel(2, 2).numer_coeffs([1.0, 2.0])
        with pytest.raises(ValueError):
            RationalModel(-1, 0)

    def test_eval_hand_value(self):
        # (1 + 2x + 3x^2) / (1 + x + 2x^2) at x = 2 is 17/11.
        theta = [1.0, 2.0, 3.0, 1.0, 2.0]
        assert rational_eval(RationalModel(), theta, 2.0) == pytest.approx(17.0 / 11.0)

    def test_eval_array_matches_scalar(self):
        theta = [0.5, -1.0, 0.25, 0.1, 0.05]
        xs = np.linspace(0, 6, 13)
        vals = rational_eval(RationalModel(), theta, xs)
        np.testing.assert_allclose(
            vals, [rational_eval(RationalModel(), theta, x) for x in xs])

    def test_pole_raises(self):
        # denominator 1 - x/2 vanishes at x = 2
        theta = [1.0, 0.0, 0.0, -0.5, 0.0]
        with pytest.raises(PoleError):
            rational_eval(RationalModel(), theta, 2.0)
        with pytest.raises(PoleError):
            rational_eval(RationalModel(), theta, np.array([0.0, 2.0]))


class TestBSplineBasis:
    def test_covering_matches_requested_interval(self):
        basis = BSplineBasis.covering(0.0, 6.0, n_knots=10, degree=2)
        assert basis.valid_interval == (0.0, 6.0)
        assert basis.n_basis == 7
        assert basis.spacing == pytest.approx(6.0 / 5.0)
        # degree*h overhang on each side
        assert basis.knots[0] == pytest.approx(-2.4)
        assert basis.knots[-1] == pytest.approx(8.4)

    def test_covering_validation(self):
        with pytest.raises(ValueError):
            BSplineBasis.covering(1.0, 0.0)
        with pytest.raises(ValueError):
            BSplineBasis.covering(0.0, 1.0, n_knots=5, degree=2)

    def test_knot_validation(self):
        with pytest.raises(ValueError):
            BSplineBasis(degree=2, knots=np.array([0.0, 1.0, 2.0]))
        with pytest.raises(ValueError):
            BSplineBasis(degree=1, knots=np.array([0.0, 1.0, 1.0, 2.0]))
        with pytest.raises(ValueError):
            BSplineBasis(degree=1, knots=np.array([0.0, 1.0, 2.0, 3.5]))

    def test_partition_of_unity(self):
        basis = BSplineBasis.covering(0.0, 6.0, n_knots=10, degree=2)
        xs = np.linspace(0.0, 6.0, 2001)
        total = sum(bspline_basis(basis, j, xs) for j in range(1, basis.n_basis + 1))
        np.testing.assert_allclose(total, 1.0, atol=1e-10)

    @pytest.mark.parametrize("degree", [0, 1, 2, 3])
    def test_matches_scipy_design(self, degree):
        basis = BSplineBasis.covering(-1.0, 2.0, n_knots=9 + degree, degree=degree)
        xs = np.linspace(-1.0, 2.0, 301)
        ours = design_matrix(basis, xs)
        reference = BSpline.design_matrix(xs, basis.knots, degree).toarray()
        np.testing.assert_allclose(ours, reference, atol=1e-12)

    def test_basis_nonnegative_with_local_support(self):
        basis = BSplineBasis.covering(0.0, 1.0, n_knots=12, degree=3)
        xs = np.linspace(0.0, 1.0, 501)
        for j in range(1, basis.n_basis + 1):
            vals = bspline_basis(basis, j, xs)
            assert np.all(vals >= 0.0)
            support = xs[vals > 1e-12]
            if support.size:
                width = support[-1] - support[0]
                assert width <= (basis.degree + 1) * basis.spacing + 1e-9

    def test_domain_errors(self):
        basis = BSplineBasis.covering(0.0, 1.0)
        with pytest.raises(DomainError):
            bspline_basis(basis, 1, -0.01)
        with pytest.raises(DomainError):
            spline_value(basis, np.ones(basis.n_basis), 1.01)
        with pytest.raises(ValueError):
            bspline_basis(basis, 0, 0.5)
        with pytest.raises(ValueError):
            bspline_basis(basis, basis.n_basis + 1, 0.5)

    def test_derivative_matches_central_differences(self):
        basis = BSplineBasis.covering(0.0, 1.0, n_knots=10, degree=2)
        h = 1e-5
        xs = np.linspace(0.02, 0.98, 97)
        # keep away from knots so the quadratic pieces make the stencil exact
        xs = xs[np.min(np.abs(xs[:, None] - basis.knots[None, :]), axis=1) > 3 * h]
        for j in range(1, basis.n_basis + 1):
            fd = (bspline_basis(basis, j, xs + h) - bspline_basis(basis, j, xs - h)) / (2 * h)
            np.testing.assert_allclose(bspline_basis_derivative(basis, j, xs), fd,
                                       atol=1e-5)

    def test_derivative_needs_degree(self):
        basis = BSplineBasis.covering(0.0, 1.0, n_knots=8, degree=0)
        with pytest.raises(ValueError):
            bspline_basis_derivative(basis, 1, 0.5)

    def test_spline_value_is_design_product(self):
        basis = BSplineBasis.covering(0.0, 2.0, n_knots=11, degree=2)
        rng = np.random.default_rng(3)
        coeffs = rng.standard_normal(basis.n_basis)
        xs = np.linspace(0.0, 2.0, 57)
        np.testing.assert_allclose(spline_value(basis, coeffs, xs),
                                   design_matrix(basis, xs) @ coeffs)
        assert spline_value(basis, coeffs, 1.0) == pytest.approx(
            float((design_matrix(basis, [1.0]) @ coeffs)[0]))

    def test_spline_derivative_from_coefficient_differences(self):
        basis = BSplineBasis.covering(0.0, 1.0, n_knots=10, degree=2)
        rng = np.random.default_rng(4)
        coeffs = rng.standard_normal(basis.n_basis)
        xs = np.linspace(0.001, 0.999, 229)
        direct = sum(coeffs[j - 1] * bspline_basis_derivative(basis, j, xs)
                     for j in range(1, basis.n_basis + 1))
        np.testing.assert_allclose(spline_derivative(basis, coeffs, xs), direct,
                                   atol=1e-10)

    def test_decreasing_coefficients_give_decreasing_curve(self):
        basis = BSplineBasis.covering(0.0, 1.0, n_knots=10, degree=2)
        coeffs = np.array([7.0, 6.0, 5.0, 4.0, 3.0, 2.0, 1.0])
        xs = np.linspace(0.0, 1.0, 400)
        vals = spline_value(basis, coeffs, xs)
        assert np.all(np.diff(vals) <= 1e-12)


class TestTukeyBiweight:
    def test_anchor_values(self):
        c = 2.0
        assert tukey_biweight(0.0, c) == 0.0
        assert tukey_biweight(c, c) == pytest.approx(c * c / 6.0)
        assert tukey_biweight(-5 * c, c) == pytest.approx(c * c / 6.0)
        # rho(c/2) = (c^2/6)(1 - (3/4)^3)
        assert tukey_biweight(c / 2.0, c) == pytest.approx((c * c / 6.0) * (1 - 27 / 64))

    def test_even_monotone_bounded(self):
        u = np.linspace(-3.0, 3.0, 601)
        rho = tukey_biweight(u, 1.0)
        np.testing.assert_allclose(rho, rho[::-1], atol=1e-15)
        assert np.all(rho <= 1.0 / 6.0 + 1e-15)
        half = rho[u >= 0]
        assert np.all(np.diff(half) >= -1e-15)

    def test_c_validation(self):
        with pytest.raises(ValueError):
            tukey_biweight(1.0, 0.0)


class TestLoss:
    def setup_method(self):
        self.data = Dataset([0.0, 1.0, 2.0], [1.0, 0.0, 3.0])

    def test_squared_error(self):
        def predict(theta, x):
            return np.full_like(x, theta[0])
        # residuals at theta=1: [0, -1, 2]
        assert loss(predict, [1.0], self.data) == pytest.approx(5.0)

    def test_tukey(self):
        def predict(theta, x):
            return np.full_like(x, theta[0])
        expected = float(np.sum(tukey_biweight(np.array([0.0, -1.0, 2.0]), 1.5)))
        assert loss(predict, [1.0], self.data,
                    LossSpec("tukey", 1.5)) == pytest.approx(expected)


class TestOlsEstimate:
    def test_matches_lstsq(self):
        rng = np.random.default_rng(5)
        a = rng.standard_normal((40, 4))
        y = rng.standard_normal(40)
        expected, *_ = np.linalg.lstsq(a, y, rcond=None)
        np.testing.assert_allclose(ols_estimate(a, y), expected, atol=1e-10)

    def test_exact_recovery(self):
        rng = np.random.default_rng(6)
        a = rng.standard_normal((30, 3))
        beta = np.array([2.0, -1.0, 0.5])
        np.testing.assert_allclose(ols_estimate(a, a @ beta), beta, atol=1e-10)

    def test_singular_design(self):
        a = np.ones((10, 2))  # duplicate columns
        with pytest.raises(SingularDesignError) as info:
            ols_estimate(a, np.arange(10.0))
        assert info.value.condition > 1e12

    def test_underdetermined(self):
        with pytest.raises(SingularDesignError):
            ols_estimate(np.ones((2, 3)), np.ones(2))

    def test_shape_validation(self):
        with pytest.raises(ValueError):
            ols_estimate(np.ones((5, 2)), np.ones(4))


class TestRationalCrudeEstimate:
    def test_recovers_noiseless_parameters(self):
        # The rearranged regression is exact when y is exactly rational.
        theta = np.array([1.0, 0.5, 0.1, 0.2, 0.05])
        model = RationalModel()
        x = np.linspace(0.0, 6.0, 30)
        y = rational_eval(model, theta, x)
        got = rational_crude_estimate(Dataset(x, y), model)
        np.testing.assert_allclose(got, theta, atol=1e-8)

    def test_constant_y_makes_design_singular(self):
        # constant y duplicates the -x*y columns against the x columns
        x = np.linspace(0.0, 6.0, 20)
        with pytest.raises(SingularDesignError):
            rational_crude_estimate(Dataset(x, np.full(20, 2.0)))
