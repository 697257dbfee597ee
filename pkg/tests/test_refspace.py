import numpy as np
import pytest
import scipy.special

from sblfem.refspace import (
    gauss_rule,
    gll_interpolate,
    gll_nodes,
    legendre_deriv,
    tensor_basis,
)


class TestGllNodes:
    def test_p1_endpoints(self):
        assert np.array_equal(gll_nodes(1), [0.0, 1.0])

    def test_p2_midpoint(self):
        assert np.allclose(gll_nodes(2), [0.0, 0.5, 1.0], atol=1e-15)

    def test_p3_against_closed_form(self):
        # Roots of P_3' are +-1/sqrt(5); mapped to [0,1] that is (1 -+ 1/sqrt5)/2.
        lo = (1.0 - 1.0 / np.sqrt(5.0)) / 2.0
        assert np.allclose(gll_nodes(3), [0.0, lo, 1.0 - lo, 1.0], atol=1e-15)

    @pytest.mark.parametrize("p", [2, 3, 5, 8, 12, 16, 20])
    def test_against_jacobi_root_oracle(self, p):
        # Interior GLL nodes are the roots of P_{p-1}^{(1,1)}, up to scaling.
        oracle, _ = scipy.special.roots_jacobi(p - 1, 1.0, 1.0)
        assert np.allclose(gll_nodes(p)[1:-1], 0.5 * (oracle + 1.0), atol=1e-13)

    @pytest.mark.parametrize("p", [2, 4, 7, 11, 15])
    def test_nodes_are_roots_of_legendre_derivative(self, p):
        # All p+1 nodes are roots of (1 - t^2) P_p'(t) with t = 2x - 1.
        t = 2.0 * gll_nodes(p) - 1.0
        residual = (1.0 - t**2) * legendre_deriv(p, t)
        assert np.abs(residual).max() <= 1e-12 * abs(legendre_deriv(p, 1.0))

    @pytest.mark.parametrize("p", [2, 5, 9, 14])
    def test_symmetry_and_monotonicity(self, p):
        nodes = gll_nodes(p)
        assert nodes[0] == 0.0 and nodes[-1] == 1.0
        assert np.all(np.diff(nodes) > 0)
        assert np.abs(nodes + nodes[::-1] - 1.0).max() <= 1e-14

    def test_rejects_degree_zero(self):
        with pytest.raises(ValueError):
            gll_nodes(0)


class TestGaussRule:
    def test_single_point(self):
        rule = gauss_rule(1)
        assert np.allclose(rule.points, [0.5]) and np.allclose(rule.weights, [1.0])

    def test_two_points_against_legendre_roots(self):
        # Roots of P_2 are +-1/sqrt(3); mapped to [0,1]: 1/2 -+ 1/(2 sqrt 3).
        rule = gauss_rule(2)
        assert np.allclose(rule.points, [0.5 - 0.5 / np.sqrt(3.0), 0.5 + 0.5 / np.sqrt(3.0)], atol=1e-15)
        assert np.allclose(rule.weights, [0.5, 0.5], atol=1e-15)

    def test_cubic_exact_with_two_points(self):
        rule = gauss_rule(2)
        assert abs(rule.weights @ rule.points**3 - 0.25) <= 1e-15

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13])
    def test_monomial_exactness(self, n):
        rule = gauss_rule(n)
        for k in range(2 * n):
            exact = 1.0 / (k + 1)
            got = rule.weights @ rule.points**k
            assert abs(got - exact) <= 1e-14 * exact if exact else abs(got) <= 1e-14

    def test_weights_sum_to_one(self):
        for n in (1, 4, 9, 16):
            assert abs(gauss_rule(n).weights.sum() - 1.0) <= 1e-14

    def test_rejects_zero_points(self):
        with pytest.raises(ValueError):
            gauss_rule(0)


class TestTensorBasis:
    def test_kronecker_at_nodes(self):
        basis = tensor_basis(4)
        xi, eta = basis.node_grid()
        vals, _ = basis.eval(xi.ravel(), eta.ravel())
        assert np.allclose(vals, np.eye(basis.n_basis), atol=1e-13)

    def test_partition_of_unity(self):
        basis = tensor_basis(6)
        vals, _ = basis.eval(np.array([0.37]), np.array([0.81]))
        assert abs(vals.sum() - 1.0) <= 1e-13

    def test_gradient_of_bilinear_interpolant(self):
        # The interpolant of xi*eta is exact, so its gradient at (0.3, 0.4)
        # must be (0.4, 0.3).
        basis = tensor_basis(3)
        coefs = gll_interpolate(lambda x, y: x * y, 3).ravel()
        vals, grads = basis.eval(np.array([0.3]), np.array([0.4]))
        grad = grads[0].T @ coefs
        assert np.allclose(grad, [0.4, 0.3], atol=1e-13)

    def test_gradient_near_node_is_stable(self):
        basis = tensor_basis(8)
        coefs = gll_interpolate(lambda x, y: x**2 + y, 8).ravel()
        for x in (0.0, 1.0, basis.nodes[3], basis.nodes[3] + 1e-13):
            vals, grads = basis.eval(np.array([x]), np.array([0.5]))
            assert abs(vals[0] @ coefs - (x**2 + 0.5)) < 1e-10
            assert np.allclose(grads[0].T @ coefs, [2.0 * x, 1.0], atol=1e-9)


class TestInterpolation:
    def test_reproduces_polynomials(self):
        rng = np.random.default_rng(7)
        p = 5
        coef = rng.standard_normal((p + 1, p + 1))

        def poly(x, y):
            return np.polynomial.polynomial.polyval2d(x, y, coef)

        grid = gll_interpolate(poly, p)
        basis = tensor_basis(p)
        pts = rng.random((100, 2))
        vals, _ = basis.eval(pts[:, 0], pts[:, 1])
        assert np.abs(vals @ grid.ravel() - poly(pts[:, 0], pts[:, 1])).max() <= 1e-12

    def test_constant_function(self):
        assert np.array_equal(gll_interpolate(lambda x, y: np.ones_like(x), 4), np.ones((5, 5)))

    def test_derivative_consistency_for_monomials(self):
        rng = np.random.default_rng(3)
        p = 7
        basis = tensor_basis(p)
        grid = gll_interpolate(lambda x, y: x**p * y, p)
        pts = rng.random((50, 2))
        _, grads = basis.eval(pts[:, 0], pts[:, 1])
        got = np.einsum("nbk,b->nk", grads, grid.ravel())
        exact = np.stack(
            [p * pts[:, 0] ** (p - 1) * pts[:, 1], pts[:, 0] ** p], axis=-1
        )
        assert np.abs(got - exact).max() <= 1e-11

    def test_layer_function_benefits_from_split(self):
        # Interpolating exp(-xi/eps) at p = 8: splitting [0,1] at kappa*p*eps
        # (the boundary-layer scaling) beats the unsplit interpolant by far
        # more than a factor 100 in the max norm.
        eps = 1e-3
        p = 8
        split = p * eps

        def f(x):
            return np.exp(-x / eps)

        basis = tensor_basis(p)
        sample = np.linspace(0.0, 1.0, 100)

        def interp_error(lo, hi):
            nodes = lo + (hi - lo) * basis.nodes
            coefs = f(nodes)
            inside = sample[(sample >= lo) & (sample <= hi)]
            vals, _ = basis.eval_1d((inside - lo) / (hi - lo))
            return np.abs(vals @ coefs - f(inside)).max()

        err_unsplit = interp_error(0.0, 1.0)
        err_split = max(interp_error(0.0, split), interp_error(split, 1.0))
        assert err_unsplit >= 100.0 * err_split
