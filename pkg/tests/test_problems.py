import numpy as np
import pytest

from fxtflows import problems, proximal
from fxtflows.core import finite_difference_gradient
from fxtflows.problems import (
    CASE2_MATRIX,
    CASE2_RHS,
    CASE3_MATRIX,
    CASE3_RHS,
    CASE4_A,
    CASE4_B,
    CASE4_DEMAND,
    CASE4_REPORTED_OPTIMUM,
    build_case1,
    build_case2,
    build_case3,
    build_case4,
    dispatch_optimum,
    random_quadratic,
)


@pytest.fixture(scope="module")
def lasso_optimum_oracle():
    """Independent solution of the box-constrained lasso via a convex solver,
    polished to machine precision with a discrete proximal-gradient loop."""
    import cvxpy as cp

    x = cp.Variable(4)
    objective = cp.Minimize(
        0.5 * cp.sum_squares(CASE2_MATRIX @ x - CASE2_RHS) + cp.norm1(x)
    )
    prob = cp.Problem(objective, [x >= -5, x <= 5])
    prob.solve()
    z = np.asarray(x.value, dtype=float)
    f_obj = problems.least_squares_objective(CASE2_MATRIX, CASE2_RHS, optimal_value=None)
    h = proximal.l1_plus_box(1.0, -5.0, 5.0)
    lam = 0.1
    for _ in range(5000):
        z = proximal.prox(h, lam, z - lam * f_obj.grad(z))
    return z, float(prob.value)


class TestCase1:
    def test_deterministic_given_seed(self):
        a = build_case1(seed=3, n_runs=2)
        b = build_case1(seed=3, n_runs=2)
        np.testing.assert_array_equal(a.reference_solution, b.reference_solution)
        for ma, mb in zip(a.methods, b.methods):
            for xa, xb in zip(ma.x0s, mb.x0s):
                np.testing.assert_array_equal(xa, xb)

    def test_reference_satisfies_first_order_conditions(self, case1_bundle):
        inst, _ = case1_bundle
        obj = inst.method("g02").objective
        assert np.linalg.norm(obj.grad(inst.reference_solution)) <= 1e-6

    def test_strong_convexity_constant(self, case1_bundle):
        inst, _ = case1_bundle
        obj = inst.method("g02").objective
        assert obj.pl_mu == 1.0
        H = obj.hessian(np.zeros(2))
        assert np.linalg.eigvalsh(H)[0] >= 1.0 - 1e-12

    def test_robust_condition_and_published_bound(self, case1_bundle):
        inst, _ = case1_bundle
        method = inst.method("g02")
        assert method.flow.condition.passed
        assert method.bound.value == pytest.approx(1.0667, abs=1e-4)

    def test_continuous_protocol_rejected_by_robust_constructor(self, case1_bundle):
        from fxtflows import flows, protocols
        from fxtflows.errors import ValidationError

        inst, _ = case1_bundle
        obj = inst.method("g02").objective
        with pytest.raises(ValidationError):
            flows.robust_flow(
                obj, protocols.rescaled(0.5, 2.0, scale=3.0),
                protocols.power(3.0, 2.0, scale=3.0),
            )

    def test_disturbance_envelope(self, case1_bundle):
        inst, _ = case1_bundle
        m = inst.method("g02")
        assert (m.disturbance.epsilon, m.disturbance.dbar) == (1.0, 1.0)


class TestCase2:
    def test_lipschitz_constant_matches_published_value(self, case2_bundle):
        inst, _ = case2_bundle
        assert inst.details["lipschitz"] == pytest.approx(7.83, abs=5e-3)

    def test_residual_vanishes_at_oracle_optimum(self, lasso_optimum_oracle):
        x_star, _ = lasso_optimum_oracle
        f_obj = problems.least_squares_objective(CASE2_MATRIX, CASE2_RHS, optimal_value=None)
        h = proximal.l1_plus_box(1.0, -5.0, 5.0)
        assert np.linalg.norm(proximal.fb_residual(f_obj, h, 0.1, x_star)) <= 1e-8

    def test_envelope_optimum_matches_published_value(self, lasso_optimum_oracle):
        x_star, value = lasso_optimum_oracle
        assert value == pytest.approx(1.25, abs=1e-3)
        f_obj = problems.least_squares_objective(CASE2_MATRIX, CASE2_RHS, optimal_value=None)
        h = proximal.l1_plus_box(1.0, -5.0, 5.0)
        env = proximal.fb_envelope(f_obj, h, 0.1, x_star)
        assert env == pytest.approx(1.25, abs=1e-3)

    def test_box_prox_keeps_iterates_feasible(self, case2_bundle):
        inst, results = case2_bundle
        f_obj = problems.least_squares_objective(CASE2_MATRIX, CASE2_RHS, optimal_value=None)
        h = proximal.l1_plus_box(1.0, -5.0, 5.0)
        rng = np.random.default_rng(0)
        for _ in range(100):
            x = rng.uniform(-12, 12, 4)
            z = proximal.prox(h, 0.1, x - 0.1 * f_obj.grad(x))
            assert np.all(z >= -5.0) and np.all(z <= 5.0)


class TestCase3:
    def test_stacked_system_consistent(self):
        rank_a = np.linalg.matrix_rank(CASE3_MATRIX)
        rank_ab = np.linalg.matrix_rank(np.column_stack([CASE3_MATRIX, CASE3_RHS]))
        assert rank_a == rank_ab

    def test_epa_blocks_full_row_rank(self):
        sys3 = problems.case3_partitioned_system()
        for A_i, _ in sys3.blocks:
            assert np.linalg.matrix_rank(A_i) == A_i.shape[0]

    def test_single_agent_reduction_matches_centralized(self, case3_bundle):
        from fxtflows import network, protocols

        inst, _ = case3_bundle
        sys1 = network.PartitionedSystem(
            ((CASE3_MATRIX, CASE3_RHS),), mode="rows", delta=1.0
        )
        graph = network.Graph.from_edges(1, [])
        g = protocols.signum(scale=3.0) + protocols.componentwise_power(1.5, scale=3.0)
        distributed = network.row_partition_flow(sys1, graph, g)
        central = inst.method("g_c1").flow
        rng = np.random.default_rng(1)
        for _ in range(10):
            x = rng.uniform(-5, 5, 5)
            np.testing.assert_allclose(distributed(x, 0.0), central(x, 0.0), atol=1e-12)

    def test_builder_deterministic(self):
        a = build_case3(seed=2)
        b = build_case3(seed=2)
        for ma, mb in zip(a.methods, b.methods):
            np.testing.assert_array_equal(ma.x0s[0], mb.x0s[0])


class TestCase4:
    def test_kkt_oracle_matches_reported_optimum(self):
        x_star = dispatch_optimum(CASE4_A, CASE4_B, float(CASE4_DEMAND.sum()))
        np.testing.assert_allclose(x_star, CASE4_REPORTED_OPTIMUM, atol=5e-3)
        # equal incremental cost at the optimum
        marginal = 2.0 * CASE4_A * x_star + CASE4_B
        assert np.ptp(marginal) <= 1e-10
        assert x_star.sum() == pytest.approx(230.0)

    def test_start_is_balanced(self):
        inst = build_case4()
        assert inst.method("fxt_L1").x0s[0].sum() == pytest.approx(230.0)

    def test_reference_residual(self):
        inst = build_case4()
        obj = inst.method("fxt_L2").objective
        # projected stationarity: gradient is constant across units
        grad = obj.grad(inst.reference_solution)
        assert np.ptp(grad) <= 1e-6


class TestRandomQuadratic:
    def test_scalar_case(self):
        obj = random_quadratic(1, 2.5, 7.0, seed=0)
        assert obj.pl_mu == 2.5
        assert obj.f(np.array([2.0])) == pytest.approx(0.5 * 2.5 * 4.0)

    def test_spectrum_endpoints_realized(self):
        obj = random_quadratic(6, 0.7, 5.0, seed=1)
        w = np.linalg.eigvalsh(obj.hessian(np.zeros(6)))
        assert w[0] == pytest.approx(0.7, rel=1e-9)
        assert w[-1] == pytest.approx(5.0, rel=1e-9)

    def test_gradient_consistency(self):
        obj = random_quadratic(4, 1.0, 3.0, seed=2)
        rng = np.random.default_rng(3)
        x = rng.uniform(-2, 2, 4)
        fd = finite_difference_gradient(obj.f, x)
        assert np.linalg.norm(obj.grad(x) - fd) <= 1e-5 * (1 + np.linalg.norm(fd))

    def test_deterministic(self):
        a = random_quadratic(5, 0.3, 2.0, seed=9)
        b = random_quadratic(5, 0.3, 2.0, seed=9)
        np.testing.assert_array_equal(a.hessian(np.zeros(5)), b.hessian(np.zeros(5)))


class TestInstanceDump:
    def test_reproducibility_file_round_trips(self, tmp_path, case2_bundle):
        import json

        inst, _ = case2_bundle
        path = tmp_path / "instance.json"
        inst.dump(path)
        data = json.loads(path.read_text())
        assert data["case"] == 2
        np.testing.assert_allclose(np.asarray(data["A"]), CASE2_MATRIX)
        assert data["lam"] == 0.1
