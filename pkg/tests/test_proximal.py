import math

import numpy as np
import pytest

from fxtflows import proximal
from fxtflows.core import finite_difference_gradient, quadratic_objective
from fxtflows.errors import CertificateMissingError, ValidationError
from fxtflows.proximal import (
    box_indicator,
    fb_envelope,
    fb_envelope_gradient,
    fb_residual,
    fit_proximal_pl_constant,
    l1,
    l1_plus_box,
    moreau,
    moreau_gradient,
    prox,
    proximal_pl_residual,
    zero_prox,
)

ALL_PROX = [
    zero_prox(),
    l1(1.0),
    l1(0.3),
    box_indicator(-5.0, 5.0),
    box_indicator(np.array([-1.0, 0.0]), np.array([2.0, 3.0])),
    l1_plus_box(1.0, -5.0, 5.0),
    l1_plus_box(2.0, -0.5, 4.0),
]


class TestProx:
    def test_soft_threshold(self):
        np.testing.assert_allclose(
            prox(l1(1.0), 1.0, np.array([2.0, -0.5])), np.array([1.0, 0.0])
        )

    def test_clamp(self):
        np.testing.assert_allclose(
            prox(box_indicator(-5.0, 5.0), 0.7, np.array([7.0, -2.0])),
            np.array([5.0, -2.0]),
        )

    def test_zero_is_identity(self):
        x = np.array([1.0, -3.5, 0.0])
        np.testing.assert_array_equal(prox(zero_prox(), 2.0, x), x)

    def test_lambda_must_be_positive(self):
        with pytest.raises(ValidationError):
            prox(l1(1.0), 0.0, np.array([1.0]))

    @pytest.mark.parametrize("h", ALL_PROX, ids=lambda h: h.kind + str(h.gamma))
    def test_nonexpansive(self, h):
        rng = np.random.default_rng(0)
        for _ in range(1000 // len(ALL_PROX) + 1):
            x = rng.uniform(-10, 10, 2)
            y = rng.uniform(-10, 10, 2)
            lam = rng.uniform(0.05, 3.0)
            d_out = np.linalg.norm(prox(h, lam, x) - prox(h, lam, y))
            assert d_out <= np.linalg.norm(x - y) + 1e-12

    def test_composite_against_grid_oracle(self):
        # independent oracle: dense one-dimensional grid minimization
        rng = np.random.default_rng(1)
        h = l1_plus_box(1.3, -5.0, 5.0)
        grid = np.arange(-5.0, 5.0 + 1e-4, 1e-4)
        for _ in range(1000):
            x = rng.uniform(-8.0, 8.0)
            lam = rng.uniform(0.1, 2.0)
            vals = h.gamma * np.abs(grid) + (grid - x) ** 2 / (2.0 * lam)
            best = grid[np.argmin(vals)]
            ours = prox(h, lam, np.array([x]))[0]
            assert abs(ours - best) <= 1e-3


class TestMoreau:
    def test_huber_value(self):
        assert moreau(l1(1.0), 1.0, np.array([2.0])) == pytest.approx(1.5)

    def test_inside_box_is_zero(self):
        assert moreau(box_indicator(-5.0, 5.0), 0.3, np.array([1.0, -2.0])) == 0.0

    def test_zero_regularizer(self):
        assert moreau(zero_prox(), 0.5, np.array([3.0, 4.0])) == 0.0

    @pytest.mark.parametrize("h", ALL_PROX, ids=lambda h: h.kind + str(h.gamma))
    def test_gradient_identity_matches_finite_differences(self, h):
        rng = np.random.default_rng(2)
        for _ in range(20):
            x = rng.uniform(-4, 4, 2)
            lam = rng.uniform(0.2, 1.5)
            g = moreau_gradient(h, lam, x)
            fd = finite_difference_gradient(lambda z: moreau(h, lam, z), x)
            assert np.linalg.norm(g - fd) <= 1e-5 * (1.0 + np.linalg.norm(g))


def lasso_instance():
    from fxtflows import problems

    f_obj = problems.least_squares_objective(
        problems.CASE2_MATRIX, problems.CASE2_RHS, optimal_value=None
    )
    h = l1_plus_box(1.0, -5.0, 5.0)
    lipschitz = float(np.linalg.eigvalsh(problems.CASE2_MATRIX.T @ problems.CASE2_MATRIX)[-1])
    return f_obj, h, lipschitz


class TestResidualAndEnvelope:
    def test_residual_reduces_to_gradient(self):
        obj = quadratic_objective(np.diag([1.0, 2.0]), np.array([0.5, -1.0]))
        rng = np.random.default_rng(3)
        for _ in range(20):
            x = rng.uniform(-3, 3, 2)
            np.testing.assert_allclose(
                fb_residual(obj, zero_prox(), 0.2, x), obj.grad(x), rtol=1e-12
            )

    def test_residual_zero_for_constant_smooth_part(self):
        from fxtflows.core import Objective

        const = Objective(dim=2, f=lambda x: 1.0, grad=lambda x: np.zeros(2))
        np.testing.assert_array_equal(
            fb_residual(const, l1(1.0), 0.5, np.zeros(2)), np.zeros(2)
        )

    def test_envelope_reduces_for_zero_regularizer(self):
        obj = quadratic_objective(np.eye(2))
        x = np.array([1.0, 2.0])
        lam = 0.3
        expected = obj.f(x) - 0.5 * lam * float(obj.grad(x) @ obj.grad(x))
        assert fb_envelope(obj, zero_prox(), lam, x) == pytest.approx(expected)

    def test_envelope_equals_optimum_at_minimizer(self):
        obj = quadratic_objective(np.eye(2), np.array([-1.0, 0.0]))
        x_min = np.array([1.0, 0.0])
        assert fb_envelope(obj, zero_prox(), 0.4, x_min) == pytest.approx(obj.f_star)

    def test_envelope_lambda_validation(self):
        f_obj, h, lipschitz = lasso_instance()
        with pytest.raises(ValidationError):
            fb_envelope(f_obj, h, 1.0 / lipschitz, np.zeros(4), lipschitz=lipschitz)

    def test_envelope_gradient_matches_finite_differences_on_lasso(self):
        f_obj, h, _ = lasso_instance()
        lam = 0.1
        rng = np.random.default_rng(4)
        for _ in range(25):
            x = rng.uniform(-4.5, 4.5, 4)
            g = fb_envelope_gradient(f_obj, h, lam, x)
            fd = finite_difference_gradient(lambda z: fb_envelope(f_obj, h, lam, z), x)
            err = np.linalg.norm(g - fd) / (1.0 + np.linalg.norm(g))
            assert err <= 1e-4


class TestProximalPl:
    def test_zero_at_optimum(self):
        obj = quadratic_objective(np.eye(2))
        value = proximal_pl_residual(obj, zero_prox(), 0.3, 1.0, np.zeros(2), 0.0)
        assert value == pytest.approx(0.0, abs=1e-12)

    def test_strongly_convex_smooth_case_nonnegative(self):
        obj = quadratic_objective(np.diag([1.0, 4.0]))
        lam = 0.2
        rng = np.random.default_rng(5)
        for _ in range(200):
            x = rng.uniform(-5, 5, 2)
            r = proximal_pl_residual(obj, zero_prox(), lam, obj.pl_mu, x, 0.0)
            assert r >= -1e-9

    def test_missing_envelope_value_raises(self):
        obj = quadratic_objective(np.eye(2))
        with pytest.raises(CertificateMissingError):
            proximal_pl_residual(obj, zero_prox(), 0.3, 1.0, np.zeros(2), None)

    def test_fitted_constant_keeps_residual_nonnegative(self):
        f_obj, h, lipschitz = lasso_instance()
        lam = 0.1
        mu = fit_proximal_pl_constant(f_obj, h, lam, 1.25, -5.0, 5.0, samples=1000, seed=0)
        assert mu > 0
        rng = np.random.default_rng(6)
        for _ in range(500):
            x = rng.uniform(-5, 5, 4)
            assert proximal_pl_residual(f_obj, h, lam, mu, x, 1.25) >= -1e-7
