import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import integrate, interpolate

from mpspline.basis import (
    BSplineBasis,
    basis_of_dimension,
    eval_basis,
    eval_basis_deriv,
    make_basis,
    penalty_matrix,
)
from mpspline.exceptions import (
    DerivativeOrderError,
    InvalidKnotsError,
    InvalidOrderError,
    OutOfDomainError,
    PenaltyOrderError,
)


def scipy_design(basis, t, deriv=0):
    # independent evaluation route through scipy's de Boor implementation
    k = basis.order - 1
    cols = []
    for j in range(basis.dimension):
        c = np.zeros(basis.dimension)
        c[j] = 1.0
        spl = interpolate.BSpline(basis.full_knots, c, k, extrapolate=False)
        vals = spl.derivative(deriv)(t) if deriv else spl(t)
        cols.append(np.nan_to_num(vals))
    return np.column_stack(cols)


class TestConstruction:
    def test_step_functions(self):
        b = make_basis(1, 1)
        assert b.dimension == 2
        np.testing.assert_array_equal(eval_basis(b, [0.2, 0.7]), [[1, 0], [0, 1]])

    def test_default_dimension(self):
        assert make_basis(4, 36).dimension == 40
        assert basis_of_dimension(40).num_interior_knots == 36

    def test_full_knots_clamped(self):
        b = make_basis(3, 4)
        assert np.all(b.full_knots[:3] == 0) and np.all(b.full_knots[-3:] == 1)
        assert np.all(np.diff(b.full_knots) >= 0)

    def test_explicit_knots(self):
        b = make_basis(4, knots=[0.1, 0.5, 0.6])
        assert b.dimension == 7
        np.testing.assert_array_equal(b.interior_knots, [0.1, 0.5, 0.6])

    @pytest.mark.parametrize("knots", [[0.5, 0.5], [0.6, 0.2], [0.0, 0.5], [0.5, 1.0], [-0.1]])
    def test_bad_knots(self, knots):
        with pytest.raises(InvalidKnotsError):
            make_basis(3, knots=knots)

    def test_bad_order(self):
        with pytest.raises(InvalidOrderError):
            make_basis(0, 3)

    def test_immutable(self):
        b = make_basis(3, 2)
        with pytest.raises(ValueError):
            b.interior_knots[0] = 0.3

    def test_equality_and_hash(self):
        assert make_basis(4, 5) == make_basis(4, 5)
        assert hash(make_basis(4, 5)) == hash(make_basis(4, 5))
        assert make_basis(4, 5) != make_basis(3, 5)


class TestEvaluation:
    def test_linear_hats_midpoint(self):
        np.testing.assert_allclose(eval_basis(make_basis(2, 0), 0.5), [0.5, 0.5], atol=1e-15)

    def test_cubic_boundary(self):
        np.testing.assert_array_equal(eval_basis(make_basis(4, 0), 0.0), [1, 0, 0, 0])
        np.testing.assert_array_equal(eval_basis(make_basis(4, 0), 1.0), [0, 0, 0, 1])

    def test_cubic_midpoint(self):
        np.testing.assert_allclose(eval_basis(make_basis(4, 0), 0.5), [0.125, 0.375, 0.375, 0.125], atol=1e-15)

    def test_linear_derivative(self):
        np.testing.assert_allclose(eval_basis_deriv(make_basis(2, 0), 0.3, 1), [-1, 1], atol=1e-14)

    def test_cubic_second_derivative(self):
        # Bernstein cubics: (1-t)^3, 3t(1-t)^2, 3t^2(1-t), t^3; second derivatives at 1/2
        np.testing.assert_allclose(eval_basis_deriv(make_basis(4, 0), 0.5, 2), [3, -3, -3, 3], atol=1e-13)

    def test_scalar_and_vector_shapes(self):
        b = make_basis(4, 3)
        assert eval_basis(b, 0.3).shape == (7,)
        assert eval_basis(b, [0.3, 0.4]).shape == (2, 7)

    def test_out_of_domain(self):
        b = make_basis(3, 2)
        with pytest.raises(OutOfDomainError):
            eval_basis(b, 1.0000001)
        with pytest.raises(OutOfDomainError):
            eval_basis(b, [-0.1, 0.5])

    def test_derivative_order(self):
        with pytest.raises(DerivativeOrderError):
            eval_basis_deriv(make_basis(3, 2), 0.5, 3)

    @pytest.mark.parametrize("p", [1, 2, 3, 4, 5])
    @pytest.mark.parametrize("K", [0, 1, 5, 17])
    def test_matches_scipy(self, p, K):
        b = make_basis(p, K)
        t = np.linspace(0, 1, 301)[:-1]  # scipy leaves t=1 undefined for extrapolate=False
        np.testing.assert_allclose(b.evaluate(t), scipy_design(b, t), atol=1e-13)
        for d in range(1, p):
            ours = b.evaluate(t, d)
            ref = scipy_design(b, t, d)
            # derivatives jump at knots for low smoothness; compare away from knots
            away = np.min(np.abs(t[:, None] - b.breakpoints[None, :]), axis=1) > 1e-9
            np.testing.assert_allclose(ours[away], ref[away], atol=1e-9 * max(1.0, np.abs(ref).max()))

    def test_unequal_knots_match_scipy(self):
        b = make_basis(4, knots=[0.05, 0.1, 0.4, 0.41, 0.9])
        t = np.linspace(0, 0.999, 500)
        np.testing.assert_allclose(b.evaluate(t), scipy_design(b, t), atol=1e-13)

    def test_derivative_matches_finite_difference(self):
        b = make_basis(4, 6)
        t = np.linspace(0.05, 0.95, 37)
        h = 1e-6
        fd = (b.evaluate(t + h) - b.evaluate(t - h)) / (2 * h)
        np.testing.assert_allclose(b.evaluate(t, 1), fd, atol=1e-6)

    def test_call_and_interpolate(self):
        b = make_basis(4, 8)
        c = b.interpolate(lambda x: x**3 - x)
        t = np.linspace(0, 1, 51)
        np.testing.assert_allclose(b(c, t), t**3 - t, atol=1e-12)

    def test_integrals(self):
        b = make_basis(3, 5, knots=[0.1, 0.3, 0.35, 0.6, 0.8])
        ref = [integrate.quad(lambda x, j=j: b.evaluate(x)[j], 0, 1, points=b.breakpoints, epsabs=1e-13)[0]
               for j in range(b.dimension)]
        np.testing.assert_allclose(b.integrals(), ref, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(p=st.integers(1, 5), K=st.integers(0, 36), t=st.floats(0.0, 1.0))
def test_partition_and_support_property(p, K, t):
    b = make_basis(p, K)
    v = b.evaluate(t)
    assert abs(v.sum() - 1.0) < 1e-12
    assert np.all(v >= 0) and np.all(v <= 1 + 1e-15)
    assert np.count_nonzero(v) <= p
    if p >= 2:
        assert abs(b.evaluate(t, 1).sum()) < 1e-9 * (K + 1) ** 2


class TestPenalty:
    def test_linear_q1(self):
        D = penalty_matrix(make_basis(2, 0), 1)
        np.testing.assert_allclose(D.entries, [[1, -1], [-1, 1]], atol=1e-14)

    @pytest.mark.parametrize("p", [2, 3, 4])
    def test_row_sums_q1(self, p):
        D = penalty_matrix(make_basis(p, 9), 1)
        np.testing.assert_allclose(D.entries.sum(axis=1), 0, atol=1e-10 * np.abs(D.entries).max())

    def test_order_guard(self):
        with pytest.raises(PenaltyOrderError):
            penalty_matrix(make_basis(3, 2), 3)
        with pytest.raises(PenaltyOrderError):
            penalty_matrix(make_basis(3, 2), 0)

    def test_structure(self):
        b = make_basis(4, 12)
        D = penalty_matrix(b, 2)
        E = D.entries
        assert D.bandwidth == 3 and D.shape == (16, 16)
        np.testing.assert_array_equal(E, E.T)
        i, j = np.indices(E.shape)
        assert np.all(E[np.abs(i - j) >= 4] == 0)
        ev = np.linalg.eigvalsh(E)
        assert ev.min() > -1e-10 * ev.max()
        assert np.linalg.matrix_rank(E, tol=1e-9 * ev.max()) == 16 - 2

    def test_quad_form_matches_dense(self):
        b = make_basis(4, 10)
        D = penalty_matrix(b, 2)
        c = np.random.default_rng(3).standard_normal(b.dimension)
        assert D.quad_form(c) == pytest.approx(c @ D.entries @ c, rel=1e-12)

    def test_linear_function_is_unpenalized(self):
        b = make_basis(4, 36)
        c = b.interpolate(lambda t: t)
        D = penalty_matrix(b, 2)
        assert D.quad_form(c) < 1e-10

    def test_quadratic_function_penalty(self):
        # second derivative of t^2 is 2, so the roughness is exactly 4
        b = make_basis(4, 36)
        c = b.interpolate(lambda t: t**2)
        assert penalty_matrix(b, 2).quad_form(c) == pytest.approx(4.0, rel=1e-10)
        assert penalty_matrix(b, 3).quad_form(c) < 1e-10

    def test_cubic_function_penalty(self):
        b = make_basis(4, 7)
        c = b.interpolate(lambda t: t**3)
        assert penalty_matrix(b, 2).quad_form(c) == pytest.approx(12.0, rel=1e-10)  # int (6t)^2
        assert penalty_matrix(b, 3).quad_form(c) == pytest.approx(36.0, rel=1e-10)

    @pytest.mark.parametrize("seed", range(4))
    def test_matches_adaptive_quadrature(self, seed):
        rng = np.random.default_rng(seed)
        p = int(rng.integers(2, 6))
        K = int(rng.integers(0, 8))
        knots = np.sort(rng.uniform(0.02, 0.98, K))
        b = BSplineBasis(p, knots)
        q = int(rng.integers(1, p))
        D = penalty_matrix(b, q).entries
        ref = np.empty_like(D)
        for i in range(b.dimension):
            for j in range(i, b.dimension):
                f = lambda x: b.evaluate(x, q)[i] * b.evaluate(x, q)[j]
                ref[i, j] = ref[j, i] = integrate.quad(f, 0, 1, points=b.breakpoints, epsabs=1e-13, epsrel=1e-12, limit=200)[0]
        np.testing.assert_allclose(D, ref, atol=1e-10 * max(1.0, np.abs(ref).max()))
