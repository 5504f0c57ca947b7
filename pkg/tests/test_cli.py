import json
import subprocess
import sys

import numpy as np
import pytest

from fxtflows import cli, dynamics, problems
from fxtflows.core import Trajectory, quadratic_objective


def run_cli(*args):
    return subprocess.run(
        [sys.executable, "-m", "fxtflows.cli", *args],
        capture_output=True, text=True,
    )


class TestTrajectoryCsv:
    def test_round_trip_is_exact(self, tmp_path):
        obj = quadratic_objective(np.diag([1.0, 3.0]), np.array([0.2, -0.7]))
        cfg = dynamics.IntegratorConfig(dt=1e-3, t_max=0.5, record_stride=7)
        traj = dynamics.integrate(
            lambda x, t: -obj.grad(x), np.array([1.234567890123, -2.0]),
            obj, dynamics.DisturbanceModel.none(), cfg,
        )
        path = tmp_path / "traj.csv"
        cli.write_trajectory_csv(traj, path)
        again = cli.read_trajectory_csv(path)
        np.testing.assert_array_equal(traj.times, again.times)
        np.testing.assert_array_equal(traj.states, again.states)
        np.testing.assert_array_equal(traj.costs, again.costs)
        np.testing.assert_array_equal(traj.grad_norms, again.grad_norms)

    def test_header_layout(self, tmp_path):
        traj = Trajectory(
            np.array([0.0, 1.0]), np.array([[1.0, 2.0], [3.0, 4.0]]),
            np.array([0.5, 0.1]), np.array([1.0, 0.2]),
        )
        path = tmp_path / "t.csv"
        cli.write_trajectory_csv(traj, path)
        header = path.read_text().splitlines()[0]
        assert header == "t,x_0,x_1,f,grad_norm"


class TestBoundsCommand:
    def test_robust_prints_published_value(self):
        result = run_cli(
            "bounds", "robust", "--mu", "1", "--sigma", "3", "--rho", "3",
            "--q", "2", "--eps", "1", "--dbar", "1",
        )
        assert result.returncode == 0
        assert float(result.stdout) == pytest.approx(1.0667, abs=1e-4)

    def test_missing_parameter_is_usage_error(self):
        result = run_cli("bounds", "nominal", "--mu", "1")
        assert result.returncode == 2

    def test_invalid_parameter_is_usage_error(self):
        result = run_cli(
            "bounds", "nominal", "--mu", "1", "--sigma", "1", "--rho", "1",
            "--p", "1", "--q", "2",
        )
        assert result.returncode == 2


class TestRegretCommand:
    def test_exponential_bound(self):
        result = run_cli("regret", "--kind", "ge", "--mu", "2")
        assert result.returncode == 0
        assert float(result.stdout) == pytest.approx(0.25)

    def test_invalid_q_is_usage_error(self):
        result = run_cli(
            "regret", "--kind", "gpq", "--mu", "1", "--v0", "2", "--p", "0.5", "--q", "0.5"
        )
        assert result.returncode == 2


class TestSolveCommand:
    def write_config(self, tmp_path, **extra):
        config = {
            "schema_version": 1,
            "problem": {"kind": "quadratic", "Q": [[1.0, 0.0], [0.0, 2.0]], "c": [0.0, 0.0]},
            "flow": {
                "variant": "first_order",
                "protocol": [
                    {"kind": "rescaled", "p": 0.5, "r": 2, "scale": 1.0},
                    {"kind": "power", "q": 2.0, "r": 2, "scale": 1.0},
                ],
            },
            "integrator": {"dt": 1e-3, "t_max": 4.0, "settle_tol": 1e-6},
            "x0": [2.0, -1.0],
        }
        config.update(extra)
        path = tmp_path / "problem.json"
        path.write_text(json.dumps(config))
        return path

    def test_solve_writes_monotone_cost_csv(self, tmp_path):
        path = self.write_config(tmp_path)
        out = tmp_path / "out"
        result = run_cli("solve", "--problem", str(path), "--out-dir", str(out))
        assert result.returncode == 0, result.stderr
        traj = cli.read_trajectory_csv(out / "trajectory.csv")
        assert np.all(np.diff(traj.costs) <= 1e-7)
        summary = (out / "summary.txt").read_text()
        assert "settling_time=" in summary

    def test_identical_runs_identical_bytes(self, tmp_path):
        path = self.write_config(tmp_path)
        out1, out2 = tmp_path / "a", tmp_path / "b"
        run_cli("solve", "--problem", str(path), "--out-dir", str(out1))
        run_cli("solve", "--problem", str(path), "--out-dir", str(out2))
        assert (out1 / "trajectory.csv").read_bytes() == (out2 / "trajectory.csv").read_bytes()

    def test_matrix_csv_reference(self, tmp_path):
        np.savetxt(tmp_path / "Q.csv", np.eye(2), delimiter=",")
        config = {
            "schema_version": 1,
            "problem": {"kind": "quadratic", "Q": "Q.csv"},
            "flow": {"variant": "first_order", "protocol": {"kind": "identity"}},
            "integrator": {"dt": 1e-3, "t_max": 1.0},
            "x0": [1.0, 1.0],
        }
        path = tmp_path / "p.json"
        path.write_text(json.dumps(config))
        result = run_cli("solve", "--problem", str(path), "--out-dir", str(tmp_path / "o"))
        assert result.returncode == 0, result.stderr

    def test_dt_override_halving_changes_regret_within_tolerance(self, tmp_path):
        path = self.write_config(
            tmp_path,
            flow={"variant": "first_order", "protocol": {"kind": "identity"}},
            integrator={"dt": 2e-3, "t_max": 10.0, "settle_tol": 1e-12},
        )
        values = []
        for i, dt in enumerate(("2e-3", "1e-3")):
            out = tmp_path / f"r{i}"
            result = run_cli("solve", "--problem", str(path), "--dt", dt, "--out-dir", str(out))
            assert result.returncode == 0, result.stderr
            traj = cli.read_trajectory_csv(out / "trajectory.csv")
            values.append(np.trapezoid(traj.costs, traj.times))
        assert abs(values[1] - values[0]) <= 0.01 * values[0]

    def test_missing_file_is_error(self, tmp_path):
        result = run_cli("solve", "--problem", str(tmp_path / "nope.json"))
        assert result.returncode != 0

    def test_bad_schema_version_rejected(self, tmp_path):
        path = self.write_config(tmp_path, schema_version=99)
        result = run_cli("solve", "--problem", str(path))
        assert result.returncode != 0

    def test_unknown_case_id_is_usage_error(self):
        result = run_cli("case", "9")
        assert result.returncode == 2


class TestCaseCommand:
    def test_case2_end_to_end(self, tmp_path):
        out = tmp_path / "case2"
        result = run_cli("case", "2", "--out-dir", str(out))
        assert result.returncode == 0, result.stdout + result.stderr
        assert "[PASS]" in result.stdout and "[FAIL]" not in result.stdout
        traj = cli.read_trajectory_csv(out / "case2_fxtpgf_run0.csv")
        assert traj.states.shape[1] == 4
        assert (out / "case2_instance.json").exists()
        summary = (out / "case2_fxtpgf_run0.summary.txt").read_text()
        assert "theoretical_bound=" in summary

    def test_concurrent_jobs_match_serial(self, case2_bundle):
        inst, serial = case2_bundle
        threaded = cli.run_case(inst, jobs=2)
        for name in serial:
            for a, b in zip(serial[name], threaded[name]):
                np.testing.assert_array_equal(a.trajectory.states, b.trajectory.states)
