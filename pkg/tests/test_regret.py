import math
import warnings

import numpy as np
import pytest

from fxtflows import dynamics, regret
from fxtflows.core import Trajectory, quadratic_objective
from fxtflows.dynamics import DisturbanceModel, IntegratorConfig
from fxtflows.errors import ValidationError


def scalar_problem():
    return quadratic_objective(np.eye(1))


class TestMeasure:
    def test_constant_at_optimum_is_zero(self):
        traj = Trajectory(
            np.array([0.0, 1.0, 2.0]), np.zeros((3, 1)), np.zeros(3), np.zeros(3),
            settling_time=0.0,
        )
        assert regret.measure_regret(traj, 0.0) == 0.0

    def test_two_sample_trapezoid(self):
        traj = Trajectory(
            np.array([0.0, 1.0]), np.zeros((2, 1)), np.array([1.0, 0.0]), np.ones(2)
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            assert regret.measure_regret(traj, 0.0) == pytest.approx(0.5)

    def test_truncation_warns(self):
        traj = Trajectory(
            np.array([0.0, 1.0]), np.zeros((2, 1)), np.array([1.0, 0.5]), np.ones(2)
        )
        with pytest.warns(RuntimeWarning):
            regret.measure_regret(traj, 0.0)

    def test_plain_gradient_flow_matches_analytic_value(self):
        # analytic regret of the scalar linear flow equals v0/(2 mu)
        obj = scalar_problem()
        cfg = IntegratorConfig(dt=2e-4, t_max=10.0)
        traj = dynamics.integrate(
            lambda x, t: -x, np.array([2.0]), obj, DisturbanceModel.none(), cfg
        )
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            measured = regret.measure_regret(traj, 0.0)
        assert measured == pytest.approx(1.0, rel=0.01)

    def test_trapezoid_converges_under_dt_halving(self):
        obj = scalar_problem()
        values = []
        for dt in (2e-3, 1e-3):
            cfg = IntegratorConfig(dt=dt, t_max=8.0)
            traj = dynamics.integrate(
                lambda x, t: -x, np.array([1.0]), obj, DisturbanceModel.none(), cfg
            )
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", RuntimeWarning)
                values.append(regret.measure_regret(traj, 0.0))
        assert abs(values[1] - values[0]) <= 0.01 * values[0]


class TestBound:
    def test_exponential_family_constant(self):
        assert regret.regret_bound("ge", 100.0, 2.0) == pytest.approx(0.25)

    def test_plain_flow_value(self):
        assert regret.regret_bound("g1", 2.0, 1.0) == pytest.approx(1.0)

    def test_two_term_beta_above_two(self):
        # p=0, q=5 puts beta at 3; with mu=0.5 both prefactors are 1
        value = regret.regret_bound("gpq", 8.0, 0.5, p=0.0, q=5.0)
        assert value == pytest.approx(1.0 / 1.5 + 1.0)

    def test_two_term_small_gap_uses_single_term_form(self):
        v0 = 0.5
        assert regret.regret_bound("gpq", v0, 1.0, p=0.5, q=2.0) == pytest.approx(
            regret.regret_bound("gp", v0, 1.0, p=0.5)
        )

    def test_beta_split_labels(self):
        assert regret.bound_kind_label("gpq", q=2.0) == "gpq_beta_lt2"
        assert regret.bound_kind_label("gpq", q=3.0) == "gpq_beta_eq2"
        assert regret.bound_kind_label("gpq", q=5.0) == "gpq_beta_gt2"

    def test_invalid_exponents_rejected(self):
        with pytest.raises(ValidationError):
            regret.regret_bound("gpq", 1.0, 1.0, p=0.5, q=0.5)
        with pytest.raises(ValidationError):
            regret.regret_bound("gp", 1.0, 1.0, p=1.5)

    def test_nonnegative_and_monotone_in_v0(self):
        kinds = [("g1", {}), ("gp", {"p": 0.5}), ("gpq", {"p": 0.5, "q": 2.0}),
                 ("gpq", {"p": 0.0, "q": 3.0}), ("gpq", {"p": 0.5, "q": 5.0}), ("ge", {})]
        v0_grid = [0.0, 0.3, 1.0, 2.0, 10.0, 100.0]
        for mu in (0.5, 1.0, 3.0):
            for kind, kw in kinds:
                values = [regret.regret_bound(kind, v0, mu, **kw) for v0 in v0_grid]
                assert all(v >= 0 for v in values)
                assert all(b >= a - 1e-12 for a, b in zip(values, values[1:]))


class TestSharpForm:
    def test_relaxations_hold_numerically(self):
        rng = np.random.default_rng(0)
        for _ in range(300):
            v0 = 10.0 ** rng.uniform(0.0001, 3.0)
            beta = rng.choice([rng.uniform(1.05, 1.95), rng.uniform(2.05, 6.0)])
            f_val = regret.f_relaxation(v0, beta)
            if beta > 2.0:
                assert f_val < 1.0 / (beta - 2.0)
            else:
                assert f_val < v0 ** (2.0 - beta) / (2.0 - beta)

    def test_sharp_bound_not_above_table_bound(self):
        for v0 in (1.5, 4.0, 50.0, 800.0):
            for q in (1.8, 4.0):
                sharp = regret.sharp_gpq_bound(v0, 1.0, 0.5, q)
                table = regret.regret_bound("gpq", v0, 1.0, p=0.5, q=q)
                assert sharp <= table + 1e-12


class TestCompliance:
    def test_plain_flow_tight(self):
        obj = scalar_problem()
        cfg = IntegratorConfig(dt=2e-4, t_max=10.0)
        table = regret.regret_compliance(obj, "g1", [np.array([x]) for x in (1.0, 2.0)], cfg)
        assert table.all_ok
        assert table.bound_grows_with_v0
        for row in table.rows:
            assert row.measured == pytest.approx(row.bound, rel=0.02)

    def test_exponential_flow_fixed_bound(self):
        obj = scalar_problem()
        cfg = IntegratorConfig(dt=1e-4, t_max=3.0, settle_tol=1e-6,
                               chatter_regularization=1e-3)
        table = regret.regret_compliance(obj, "ge", [np.array([4.0])], cfg)
        assert table.all_ok
        assert not table.bound_grows_with_v0
        assert table.rows[0].bound == pytest.approx(1.0)

    def test_two_term_bound_grows_at_log_rate(self):
        obj = scalar_problem()
        cfg = IntegratorConfig(dt=1e-4, t_max=6.0, settle_tol=1e-6,
                               chatter_regularization=1e-4)
        xs = [np.array([2.0]), np.array([6.0])]
        table = regret.regret_compliance(obj, "gpq", xs, cfg, p=0.5, q=3.0)
        assert table.all_ok
        assert table.bound_grows_with_v0
