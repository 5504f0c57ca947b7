"""Command-line harness: run flows, reproduce the case studies, emit CSV.

Subcommands: ``case`` (reproduce one packaged case study and check its
thresholds), ``solve`` (generic runner driven by a JSON config), ``bounds``
and ``regret`` (closed-form calculators).  Trajectory CSVs use the header
``t,x_0,...,x_{n-1},f,grad_norm`` with 17 significant digits so parsing a
file back reproduces the in-memory trajectory exactly.
"""

from __future__ import annotations

import argparse
import concurrent.futures
import dataclasses
import json
import math
import os
import sys
from dataclasses import dataclass

import numpy as np

from . import bounds, dynamics, flows, problems, protocols, proximal, regret
from .core import Objective, SolveReport, Trajectory, quadratic_objective
from .dynamics import DisturbanceModel, IntegratorConfig
from .errors import FxtError, ValidationError

SCHEMA_VERSION = 1
FLOAT_FMT = "%.17g"


def write_trajectory_csv(traj: Trajectory, path) -> None:
    n = traj.states.shape[1]
    header = ",".join(["t"] + [f"x_{i}" for i in range(n)] + ["f", "grad_norm"])
    with open(path, "w") as fh:
        fh.write(header + "\n")
        for k in range(len(traj)):
            row = [traj.times[k], *traj.states[k], traj.costs[k], traj.grad_norms[k]]
            fh.write(",".join(FLOAT_FMT % v for v in row) + "\n")


def read_trajectory_csv(path) -> Trajectory:
    with open(path) as fh:
        header = fh.readline().strip().split(",")
        rows = [[float(v) for v in line.split(",")] for line in fh if line.strip()]
    n = len(header) - 3
    data = np.asarray(rows)
    return Trajectory(
        times=data[:, 0],
        states=data[:, 1 : 1 + n],
        costs=data[:, 1 + n],
        grad_norms=data[:, 2 + n],
    )


def write_summary(path, entries: dict) -> None:
    with open(path, "w") as fh:
        for key, value in entries.items():
            if isinstance(value, float):
                value = FLOAT_FMT % value
            fh.write(f"{key}={value}\n")


@dataclass(frozen=True)
class RunResult:
    method: str
    run_index: int
    trajectory: Trajectory
    report: SolveReport


def run_single(method: problems.MethodSpec, run_index: int,
               cfg: IntegratorConfig | None = None) -> RunResult:
    cfg = cfg or method.config
    traj = dynamics.integrate(
        method.flow, method.x0s[run_index], method.objective, method.disturbance, cfg
    )
    measured = dynamics.measure_settling(traj, cfg.settle_tol)
    reg_value = None
    if method.objective.f_star is not None and traj.settling_time is not None:
        reg_value = regret.measure_regret(traj, method.objective.f_star)
    report = SolveReport(
        trajectory=traj,
        final_gradient_norm=float(traj.grad_norms[-1]),
        measured_settling=measured,
        theoretical_bound=method.bound.value if method.bound else None,
        regret=reg_value,
    )
    return RunResult(method.name, run_index, traj, report)


def _override_config(cfg: IntegratorConfig, overrides: dict | None) -> IntegratorConfig:
    if not overrides:
        return cfg
    fields = {k: v for k, v in overrides.items() if v is not None}
    return dataclasses.replace(cfg, **fields) if fields else cfg


def run_case(
    inst: problems.CaseInstance,
    overrides: dict | None = None,
    jobs: int = 1,
) -> dict[str, list[RunResult]]:
    """Run every method of a case; independent runs may execute concurrently."""
    tasks = []
    for method in inst.methods:
        cfg = _override_config(method.config, overrides)
        for idx in range(len(method.x0s)):
            tasks.append((method, idx, cfg))
    results: dict[str, list[RunResult]] = {m.name: [] for m in inst.methods}
    if jobs > 1:
        with concurrent.futures.ThreadPoolExecutor(max_workers=jobs) as pool:
            futures = [pool.submit(run_single, m, i, c) for m, i, c in tasks]
            outcomes = [f.result() for f in futures]
    else:
        outcomes = [run_single(m, i, c) for m, i, c in tasks]
    for out in outcomes:
        results[out.method].append(out)
    for name in results:
        results[name].sort(key=lambda r: r.run_index)
    return results


@dataclass(frozen=True)
class CheckResult:
    name: str
    passed: bool
    detail: str


def _first_crossing(times, values, level) -> float | None:
    hits = np.nonzero(np.asarray(values) <= level)[0]
    return float(times[hits[0]]) if hits.size else None


def _distance_series(traj: Trajectory, x_star) -> np.ndarray:
    return np.linalg.norm(traj.states - np.asarray(x_star), axis=1)


def _value_at(times, values, t) -> float:
    return float(np.interp(t, times, values))


def linear_fit_r2(x, y) -> float:
    x, y = np.asarray(x), np.asarray(y)
    slope, intercept = np.polyfit(x, y, 1)
    pred = slope * x + intercept
    ss_res = float(np.sum((y - pred) ** 2))
    ss_tot = float(np.sum((y - np.mean(y)) ** 2))
    return 1.0 - ss_res / ss_tot if ss_tot > 0 else 1.0


def case1_checks(inst, results) -> list[CheckResult]:
    x_star = inst.reference_solution
    t_star = inst.method("g02").bound.value
    deadline = t_star * 1.05
    checks = []
    worst = -math.inf
    ok = True
    for run in results["g02"]:
        dist = _distance_series(run.trajectory, x_star)
        t_hit = _first_crossing(run.trajectory.times, dist, 1e-3)
        if t_hit is None or t_hit > deadline:
            ok = False
        worst = max(worst, t_hit if t_hit is not None else math.inf)
    checks.append(
        CheckResult(
            "sliding protocol settles within the published bound",
            ok,
            f"worst crossing {worst:.4f}s vs deadline {deadline:.4f}s",
        )
    )
    ok2 = True
    floor = math.inf
    for run in results["g052"]:
        traj = run.trajectory
        dist = _distance_series(traj, x_star)
        window = (traj.times >= 2.0) & (traj.times <= 5.0)
        low = float(dist[window].min())
        floor = min(floor, low)
        if low <= 1e-2:
            ok2 = False
    checks.append(
        CheckResult(
            "continuous protocol stalls above 1e-2 under the bounded disturbance",
            ok2,
            f"lowest error on [2,5] across runs: {floor:.4g}",
        )
    )
    return checks


def case2_checks(inst, results) -> list[CheckResult]:
    f_star = inst.reference_value
    run_fxt = results["fxtpgf"][0]
    run_epgf = results["epgf"][0]
    err_fxt = np.maximum(run_fxt.trajectory.costs - f_star, 0.0)
    t_hit = _first_crossing(run_fxt.trajectory.times, err_fxt, 1e-4)
    checks = [
        CheckResult(
            "proximal fixed-time flow reaches 1e-4 envelope error before t=2",
            t_hit is not None and t_hit < 2.0,
            f"crossing at {t_hit}",
        )
    ]
    final_val = float(run_fxt.trajectory.costs[-1])
    checks.append(
        CheckResult(
            "converged envelope value matches the reference optimum to 1e-3",
            abs(final_val - f_star) <= 1e-3,
            f"final envelope {final_val:.6f} vs {f_star}",
        )
    )
    err_epgf_2 = _value_at(
        run_epgf.trajectory.times,
        np.maximum(run_epgf.trajectory.costs - f_star, 0.0),
        2.0,
    )
    checks.append(
        CheckResult(
            "exponential baseline is at least 10x worse at t=2",
            err_epgf_2 >= 10.0 * 1e-4,
            f"baseline envelope error at t=2: {err_epgf_2:.4g}",
        )
    )
    return checks


def case3_checks(inst, results) -> list[CheckResult]:
    checks = []
    for name in ("g_d", "g_c1", "g_c2"):
        run = results[name][0]
        t_hit = _first_crossing(run.trajectory.times, run.trajectory.grad_norms, 1e-3)
        checks.append(
            CheckResult(
                f"{name} drives the gradient norm to 1e-3 under disturbance",
                t_hit is not None,
                f"first crossing at {t_hit}",
            )
        )
    run = results["epa"][0]
    low = float(run.trajectory.grad_norms.min())
    checks.append(
        CheckResult(
            "edge-based projected baseline stalls above 1e-2",
            low > 1e-2,
            f"lowest gradient norm {low:.4g}",
        )
    )
    return checks


def case4_checks(inst, results) -> list[CheckResult]:
    target = problems.CASE4_REPORTED_OPTIMUM
    checks = []
    settles = {}
    for name in ("fxt_L1", "fxt_L2"):
        run = results[name][0]
        dist = _distance_series(run.trajectory, target)
        final = float(dist[-1])
        t_hit = _first_crossing(run.trajectory.times, dist, 1e-2)
        settles[name] = t_hit
        checks.append(
            CheckResult(
                f"{name} reaches the reported optimum within 1e-2",
                final <= 1e-2 and t_hit is not None,
                f"final error {final:.4g}, crossing at {t_hit}",
            )
        )
    ok_order = (
        settles["fxt_L1"] is not None
        and settles["fxt_L2"] is not None
        and settles["fxt_L2"] < settles["fxt_L1"]
    )
    checks.append(
        CheckResult(
            "complete-graph scaling settles before the circle scaling",
            ok_order,
            f"settling {settles['fxt_L2']} vs {settles['fxt_L1']}",
        )
    )
    run = results["lapgrad_L2"][0]
    dist = _distance_series(run.trajectory, target)
    window = max(t for t in settles.values() if t is not None)
    mask = run.trajectory.times <= window
    never_settles = float(dist[mask].min()) > 1e-2
    half = run.trajectory.times <= 0.5 * window
    r2 = linear_fit_r2(run.trajectory.times[half], np.log10(dist[half]))
    checks.append(
        CheckResult(
            "plain projected gradient flow decays linearly in log scale without settling",
            never_settles and r2 >= 0.95,
            f"R2={r2:.4f}, min error in window {float(dist[mask].min()):.4g}",
        )
    )
    return checks


CASE_CHECKS = {1: case1_checks, 2: case2_checks, 3: case3_checks, 4: case4_checks}


def case_criteria(inst: problems.CaseInstance, results) -> list[CheckResult]:
    return CASE_CHECKS[inst.case_id](inst, results)


def _write_case_outputs(inst, results, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    inst.dump(os.path.join(out_dir, f"case{inst.case_id}_instance.json"))
    for method in inst.methods:
        for run in results[method.name]:
            stem = f"case{inst.case_id}_{method.name}_run{run.run_index}"
            write_trajectory_csv(run.trajectory, os.path.join(out_dir, stem + ".csv"))
            entries = {
                "case": inst.case_id,
                "method": method.name,
                "run": run.run_index,
                "final_time": run.trajectory.final_time,
                "final_gradient_norm": run.report.final_gradient_norm,
                "settling_time": run.report.measured_settling,
                "theoretical_bound": run.report.theoretical_bound,
                "regret": run.report.regret,
            }
            if inst.reference_solution is not None:
                entries["final_error"] = float(
                    np.linalg.norm(run.trajectory.final_state - inst.reference_solution)
                )
            write_summary(os.path.join(out_dir, stem + ".summary.txt"), entries)


def cmd_case(args) -> int:
    overrides = {
        "dt": args.dt,
        "t_max": args.tmax,
        "settle_tol": args.tol,
        "seed": args.seed if args.seed is not None else None,
    }
    if args.case == 1:
        inst = problems.build_case1(
            seed=args.seed or 0, safety_multiplier=args.safety_multiplier
        )
    else:
        inst = problems.build_case(args.case, seed=args.seed or 0)
    results = run_case(inst, overrides=overrides, jobs=args.jobs)
    if args.out_dir:
        _write_case_outputs(inst, results, args.out_dir)
    checks = case_criteria(inst, results)
    all_ok = True
    for check in checks:
        status = "PASS" if check.passed else "FAIL"
        print(f"[{status}] case {args.case}: {check.name} ({check.detail})")
        all_ok = all_ok and check.passed
    return 0 if all_ok else 1


def _load_matrix(entry, base_dir):
    if isinstance(entry, str):
        return np.loadtxt(os.path.join(base_dir, entry), delimiter=",", ndmin=2)
    return np.asarray(entry, dtype=float)


def _load_vector(entry, base_dir):
    if isinstance(entry, str):
        return np.loadtxt(os.path.join(base_dir, entry), delimiter=",", ndmin=1)
    return np.asarray(entry, dtype=float)


def _objective_from_config(spec: dict, base_dir) -> Objective:
    kind = spec.get("kind")
    if kind == "quadratic":
        Q = _load_matrix(spec.get("Q", spec.get("Q_csv")), base_dir)
        c = spec.get("c", spec.get("c_csv"))
        return quadratic_objective(Q, _load_vector(c, base_dir) if c is not None else None)
    if kind == "least_squares":
        A = _load_matrix(spec.get("A", spec.get("A_csv")), base_dir)
        b = _load_vector(spec.get("b", spec.get("b_csv")), base_dir)
        return problems.least_squares_objective(A, b, optimal_value=None)
    raise ValidationError(f"unknown problem kind {kind!r}")


def _prox_from_config(spec: dict) -> proximal.ProxFunction:
    return proximal.ProxFunction(
        spec["kind"],
        gamma=spec.get("gamma", 1.0),
        lower=spec.get("lower", -math.inf),
        upper=spec.get("upper", math.inf),
    )


def _flow_from_config(spec: dict, obj: Objective, base_dir) -> flows.FlowSpec:
    variant = spec.get("variant")
    if variant == "first_order":
        return flows.first_order_flow(obj, protocols.from_config(spec["protocol"]))
    if variant == "newton":
        return flows.newton_flow(obj, protocols.from_config(spec["protocol"]))
    if variant == "projected":
        A = _load_matrix(spec["A"], base_dir) if "A" in spec else None
        P = (
            _load_matrix(spec["P"], base_dir)
            if "P" in spec
            else flows.orthogonal_projector(A)
        )
        return flows.projected_flow(
            obj, P, protocols.from_config(spec["protocol"]),
            A=A, strongly_convex=bool(spec.get("strongly_convex", False)),
        )
    if variant == "feasibility":
        A = _load_matrix(spec["A"], base_dir)
        b = _load_vector(spec["b"], base_dir)
        return flows.feasibility_flow(A, b, protocols.from_config(spec["protocol"]))
    if variant == "free_init":
        A = _load_matrix(spec["A"], base_dir)
        b = _load_vector(spec["b"], base_dir)
        P = (
            _load_matrix(spec["P"], base_dir)
            if "P" in spec
            else flows.orthogonal_projector(A)
        )
        return flows.free_init_flow(
            obj, A, b, P,
            protocols.from_config(spec["protocol"]),
            protocols.from_config(spec["feasibility_protocol"]),
            strongly_convex=bool(spec.get("strongly_convex", False)),
        )
    if variant in ("proximal", "epgf"):
        h = _prox_from_config(spec["h"])
        lam = float(spec["lam"])
        lipschitz = float(spec["lipschitz"])
        if variant == "epgf":
            return flows.epgf_flow(obj, h, lam, lipschitz)
        return flows.proximal_flow(
            obj, h, lam,
            float(spec.get("kappa_p", 1.0)), float(spec.get("kappa_q", 1.0)),
            float(spec.get("p", 0.5)), float(spec.get("q", 2.0)),
            lipschitz,
        )
    raise ValidationError(f"unknown flow variant {variant!r}")


def _disturbance_from_config(spec: dict | None) -> DisturbanceModel:
    if not spec or spec.get("kind", "none") == "none":
        return DisturbanceModel.none()
    if spec["kind"] == "sinusoid":
        return DisturbanceModel.sinusoid(
            np.asarray(spec["amplitude"], dtype=float), float(spec.get("frequency", 1.0))
        )
    raise ValidationError("config files support disturbance kinds 'none' and 'sinusoid'")


def cmd_solve(args) -> int:
    with open(args.problem) as fh:
        config = json.load(fh)
    version = config.get("schema_version")
    if version != SCHEMA_VERSION:
        raise ValidationError(f"unsupported schema_version {version!r}")
    base_dir = os.path.dirname(os.path.abspath(args.problem))
    obj = _objective_from_config(config["problem"], base_dir)
    flow = _flow_from_config(config["flow"], obj, base_dir)
    dist = _disturbance_from_config(config.get("disturbance"))
    integ = dict(config.get("integrator", {}))
    for key, value in (
        ("dt", args.dt), ("t_max", args.tmax),
        ("settle_tol", args.tol), ("seed", args.seed),
    ):
        if value is not None:
            integ[key] = value
    cfg = IntegratorConfig(**integ)
    if args.x0 is not None:
        x0 = np.loadtxt(args.x0, delimiter=",", ndmin=1)
    else:
        x0 = np.asarray(config["x0"], dtype=float)
    traj = dynamics.integrate(flow, x0, obj, dist, cfg)
    out_dir = args.out_dir or "."
    os.makedirs(out_dir, exist_ok=True)
    write_trajectory_csv(traj, os.path.join(out_dir, "trajectory.csv"))
    entries = {
        "variant": flow.variant,
        "final_time": traj.final_time,
        "final_gradient_norm": float(traj.grad_norms[-1]),
        "settling_time": traj.settling_time,
        "final_cost": float(traj.costs[-1]),
    }
    if obj.f_star is not None and traj.settling_time is not None:
        entries["regret"] = regret.measure_regret(traj, obj.f_star)
    write_summary(os.path.join(out_dir, "summary.txt"), entries)
    print(f"wrote {os.path.join(out_dir, 'trajectory.csv')}")
    return 0


BOUND_DISPATCH = {
    "lemma2": (bounds.lemma2_bound, ("c1", "c2", "r1", "r2", "k")),
    "nominal": (bounds.nominal_bound, ("mu", "sigma", "rho", "p", "q")),
    "robust": (bounds.robust_bound, ("mu", "sigma", "rho", "q", "eps", "dbar")),
    "newton": (bounds.newton_bound, ("sigma", "rho", "p", "q")),
    "exponential": (bounds.exponential_bound, ("alpha", "mu", "variant", "n")),
    "finite_time": (bounds.finite_time_bound, ("mu", "sigma", "p", "v0")),
    "projected": (bounds.projected_bound, ("mu", "lambda2", "sigma", "rho", "p", "q")),
    "feasibility": (bounds.feasibility_bound, ("sigma", "rho", "p", "q", "lambda2")),
    "proximal": (
        bounds.proximal_bound,
        ("mu", "lam", "lipschitz", "kappa_p", "kappa_q", "p", "q"),
    ),
    "consensus": (bounds.consensus_bound, ("lambda2", "sigma", "rho", "p", "q")),
    "consensus_exponential": (
        bounds.consensus_exponential_bound,
        ("n_agents", "alpha", "lambda2"),
    ),
    "consensus_robust": (
        bounds.consensus_robust_bound,
        ("lambda2", "sigma", "rho", "q", "eps", "dbar"),
    ),
}


def cmd_bounds(args, parser) -> int:
    fn, names = BOUND_DISPATCH[args.name]
    kwargs = {}
    for name in names:
        value = getattr(args, name)
        if value is None:
            parser.error(f"bounds {args.name} requires --{name.replace('_', '-')}")
        kwargs[name] = value
    try:
        value = fn(**kwargs)
    except ValidationError as exc:
        parser.error(str(exc))
    print(FLOAT_FMT % value)
    return 0


def cmd_regret(args, parser) -> int:
    try:
        value = regret.regret_bound(args.kind, args.v0, args.mu, args.p, args.q)
    except ValidationError as exc:
        parser.error(str(exc))
    print(FLOAT_FMT % value)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="fxtflows",
        description="Fixed-time gradient flow solvers and case-study harness.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_case = sub.add_parser("case", help="reproduce one packaged case study")
    p_case.add_argument("case", type=int, choices=(1, 2, 3, 4))
    p_case.add_argument("--out-dir", default=None)
    p_case.add_argument("--dt", type=float, default=None)
    p_case.add_argument("--tmax", type=float, default=None)
    p_case.add_argument("--tol", type=float, default=None)
    p_case.add_argument("--seed", type=int, default=None)
    p_case.add_argument("--safety-multiplier", type=float, default=1.0)
    p_case.add_argument("--jobs", type=int, default=1)

    p_solve = sub.add_parser("solve", help="run a flow described by a JSON config")
    p_solve.add_argument("--problem", required=True, help="JSON config path")
    p_solve.add_argument("--x0", default=None, help="CSV file overriding x0")
    p_solve.add_argument("--out-dir", default=None)
    p_solve.add_argument("--dt", type=float, default=None)
    p_solve.add_argument("--tmax", type=float, default=None)
    p_solve.add_argument("--tol", type=float, default=None)
    p_solve.add_argument("--seed", type=int, default=None)

    p_bounds = sub.add_parser("bounds", help="print a settling-time bound")
    p_bounds.add_argument("name", choices=sorted(BOUND_DISPATCH))
    for flag in (
        "mu", "sigma", "rho", "p", "q", "eps", "dbar", "alpha", "v0",
        "lambda2", "lam", "lipschitz", "kappa-p", "kappa-q",
        "c1", "c2", "r1", "r2", "k",
    ):
        p_bounds.add_argument(f"--{flag}", type=float, default=None)
    p_bounds.add_argument("--variant", choices=("l2", "l1"), default="l2")
    p_bounds.add_argument("--n", type=int, default=1)
    p_bounds.add_argument("--n-agents", type=int, default=None)

    p_regret = sub.add_parser("regret", help="print a regret bound")
    p_regret.add_argument("--kind", required=True, choices=("g1", "gp", "gpq", "ge"))
    p_regret.add_argument("--mu", type=float, required=True)
    p_regret.add_argument("--v0", type=float, default=0.0)
    p_regret.add_argument("--p", type=float, default=None)
    p_regret.add_argument("--q", type=float, default=None)

    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.command == "case":
            return cmd_case(args)
        if args.command == "solve":
            return cmd_solve(args)
        if args.command == "bounds":
            return cmd_bounds(args, parser)
        if args.command == "regret":
            return cmd_regret(args, parser)
    except FxtError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
