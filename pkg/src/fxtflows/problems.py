"""Builders for the four packaged case studies and random problem generators.

Each builder returns a :class:`CaseInstance` whose methods are self-contained
(objective used for monitoring, flow, disturbance, integrator settings, and
initializations), plus a details dict holding every matrix, parameter, and
seed needed to reproduce the instance.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import bounds, dynamics, flows, network, protocols, proximal
from .core import Array, Objective, quadratic_objective
from .dynamics import DisturbanceModel, IntegratorConfig
from .errors import ValidationError

CASE2_MATRIX = np.array(
    [
        [1.0, 0.0, -1.0, 0.0],
        [1.0, 2.0, -1.0, -1.0],
        [0.0, 0.0, 0.0, 1.0],
    ]
)
CASE2_RHS = np.array([1.0, 1.0, 1.0])
CASE2_OPTIMAL_ENVELOPE = 1.25

CASE3_MATRIX = np.array(
    [
        [3.0, 4.0, -3.0, -2.0, -2.0],
        [1.0, -2.0, -4.0, -5.0, 3.0],
        [4.0, 5.0, -2.0, -2.0, -2.0],
        [0.0, -4.0, 4.0, 4.0, 4.0],
        [3.0, -4.0, -3.0, 4.0, 2.0],
        [5.0, -3.0, -5.0, -5.0, 2.0],
    ]
)
CASE3_RHS = np.array([2.0, 0.0, 5.0, 4.0, -5.0, -4.0])
CASE3_ROW_GROUPS = ((0, 1), (2, 3), (4,), (5,))

CASE4_A = np.array([0.001562, 0.00194, 0.00482, 0.00228])
CASE4_B = np.array([7.92, 7.85, 7.97, 7.48])
CASE4_C = np.array([561.0, 310.0, 78.0, 459.0])
CASE4_DEMAND = np.array([60.0, 40.0, 50.0, 80.0])
CASE4_REPORTED_OPTIMUM = np.array([42.87, 52.56, 8.71, 125.86])


@dataclass(frozen=True)
class MethodSpec:
    """One method to run on a case: flow, monitor objective, and settings."""

    name: str
    objective: Objective
    flow: flows.FlowSpec
    disturbance: DisturbanceModel
    config: IntegratorConfig
    x0s: tuple[Array, ...]
    bound: bounds.SettlingBound | None = None
    notes: dict = field(default_factory=dict)


@dataclass(frozen=True)
class CaseInstance:
    case_id: int
    name: str
    methods: tuple[MethodSpec, ...]
    reference_solution: Array | None
    reference_value: float | None
    details: dict

    def method(self, name: str) -> MethodSpec:
        for m in self.methods:
            if m.name == name:
                return m
        raise KeyError(name)

    def dump(self, path) -> None:
        """Write the reproducibility record (matrices, parameters, seeds)."""
        with open(path, "w") as fh:
            json.dump(self.details, fh, indent=2, sort_keys=True)


def _sigmoid(z: Array) -> Array:
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    return out


def logistic_objective(Z: Array, labels: Array, reg: float) -> Objective:
    """Binary logistic loss with an l2 penalty; strongly convex with modulus reg."""
    Z = np.asarray(Z, dtype=float)
    labels = np.asarray(labels, dtype=float)
    K, n = Z.shape

    def f(x):
        margins = -labels * (Z @ x)
        return float(np.mean(np.logaddexp(0.0, margins))) + 0.5 * reg * float(x @ x)

    def grad(x):
        s = _sigmoid(-labels * (Z @ x))
        return -(Z.T @ (labels * s)) / K + reg * np.asarray(x, dtype=float)

    def hessian(x):
        s = _sigmoid(-labels * (Z @ x))
        w = s * (1.0 - s)
        return (Z.T @ (Z * w[:, None])) / K + reg * np.eye(n)

    return Objective(dim=n, f=f, grad=grad, hessian=hessian, pl_mu=reg)


def _case1_data(seed: int, n_samples: int):
    rng = np.random.default_rng(seed)
    along = rng.uniform(-5.0, 5.0, size=n_samples)
    across = rng.standard_normal(n_samples)
    while np.any(across == 0.0):
        across[across == 0.0] = rng.standard_normal(np.count_nonzero(across == 0.0))
    u = np.array([1.0, 1.0]) / math.sqrt(2.0)
    v = np.array([1.0, -1.0]) / math.sqrt(2.0)
    Z = np.outer(along, u) + np.outer(across, v)
    labels = np.sign(across)
    return Z, labels


def build_case1(seed: int = 0, n_runs: int = 5, safety_multiplier: float = 1.0) -> CaseInstance:
    """Regularized logistic regression under mixed disturbances.

    Sample points scatter around the diagonal line with labels given by the
    side of the line.  The sliding protocol rejects the full disturbance; the
    continuous one is included as the vanishing-disturbance baseline and only
    reaches a neighborhood.  The reference optimum comes from a nominal run
    driven to a 1e-10 gradient norm.
    """
    Z, labels = _case1_data(seed, 500)
    base = logistic_objective(Z, labels, reg=1.0)

    g_sliding = protocols.rescaled(0.0, 2.0, scale=3.0)
    g_cubic = protocols.power(3.0, 2.0, scale=3.0)
    nominal = flows.first_order_flow(base, g_sliding + g_cubic)
    ref_cfg = IntegratorConfig(
        dt=1e-4, t_max=3.0, settle_tol=1e-10,
        chatter_regularization=1e-3, record_stride=5,
    )
    ref_traj = dynamics.integrate(
        nominal, np.zeros(2), base, DisturbanceModel.none(), ref_cfg
    )
    if ref_traj.settling_time is None:
        raise ValidationError("case 1 reference run failed to settle")
    x_star = ref_traj.final_state
    obj = base.with_fields(
        f_star=float(base.f(x_star)),
        minimizer_projection=lambda x, _x=x_star: _x,
    )

    def direction(x, t):
        return np.array([math.sin(t), math.cos(t)])

    dist = DisturbanceModel.state_scaled(1.0, 1.0, direction)
    rng = np.random.default_rng(seed + 1)
    x0s = tuple(rng.uniform(-100.0, 100.0, size=2) for _ in range(n_runs))

    # The settling bound follows the published evaluation of the robust
    # condition for this protocol (sigma = rho = 3, q = 2).
    t_star = bounds.robust_bound(1.0, 3.0, 3.0, 2.0, 1.0, 1.0)
    sliding_method = MethodSpec(
        name="g02",
        objective=obj,
        flow=flows.robust_flow(obj, g_sliding, g_cubic, dist, safety_multiplier),
        disturbance=dist,
        config=IntegratorConfig(dt=1e-4, t_max=1.5, settle_tol=1e-6, record_stride=5),
        x0s=x0s,
        bound=bounds.SettlingBound(
            t_star, "robust",
            {"mu": 1.0, "sigma": 3.0, "rho": 3.0, "q": 2.0, "eps": 1.0, "dbar": 1.0},
        ),
    )
    continuous_method = MethodSpec(
        name="g052",
        objective=obj,
        flow=flows.first_order_flow(obj, protocols.rescaled(0.5, 2.0, scale=3.0) + g_cubic),
        disturbance=dist,
        config=IntegratorConfig(dt=1e-4, t_max=5.0, settle_tol=1e-6, record_stride=10),
        x0s=x0s,
        notes={"vanishing_only": True},
    )
    details = {
        "case": 1,
        "seed": seed,
        "n_samples": 500,
        "reg": 1.0,
        "mu": 1.0,
        "disturbance": {"kind": "state_scaled_plus_bounded", "epsilon": 1.0, "dbar": 1.0},
        "protocols": {
            "g02": [protocols.to_config(g_sliding), protocols.to_config(g_cubic)],
            "g052": [
                protocols.to_config(protocols.rescaled(0.5, 2.0, scale=3.0)),
                protocols.to_config(g_cubic),
            ],
        },
        "bound": t_star,
        "x_star": x_star.tolist(),
        "x0s": [x.tolist() for x in x0s],
        "safety_multiplier": safety_multiplier,
    }
    return CaseInstance(
        case_id=1,
        name="logistic regression with disturbance",
        methods=(sliding_method, continuous_method),
        reference_solution=x_star,
        reference_value=obj.f_star,
        details=details,
    )


def least_squares_objective(A: Array, b: Array, optimal_value: float | None = 0.0) -> Objective:
    """Objective for ``0.5*||Ax - b||^2`` with quadratic certificates."""
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    Q = A.T @ A
    c = -(A.T @ b)
    const = 0.5 * float(b @ b)
    base = quadratic_objective(Q, c)

    def f(x):
        return base.f(x) + const

    return Objective(
        dim=A.shape[1],
        f=f,
        grad=base.grad,
        hessian=base.hessian,
        f_star=optimal_value,
        pl_mu=base.pl_mu,
        minimizer_projection=base.minimizer_projection,
    )


def envelope_objective(
    f_obj: Objective,
    h: proximal.ProxFunction,
    lam: float,
    envelope_star: float | None,
    pl_mu: float | None = None,
) -> Objective:
    """Monitoring objective whose cost is the forward-backward envelope."""

    def f(x):
        return proximal.fb_envelope(f_obj, h, lam, x)

    def grad(x):
        return proximal.fb_envelope_gradient(f_obj, h, lam, x)

    return Objective(dim=f_obj.dim, f=f, grad=grad, f_star=envelope_star, pl_mu=pl_mu)


def build_case2(seed: int = 0) -> CaseInstance:
    """Box-constrained lasso solved through the forward-backward envelope.

    The fixed-time proximal flow is compared against the exponentially
    convergent proximal gradient flow.  Monitoring uses the envelope value,
    whose optimum matches the composite optimum.
    """
    A, b = CASE2_MATRIX, CASE2_RHS
    f_obj = least_squares_objective(A, b, optimal_value=None)
    lipschitz = float(np.linalg.eigvalsh(A.T @ A)[-1])
    lam = 0.1
    h = proximal.l1_plus_box(1.0, -5.0, 5.0)
    fitted_mu = proximal.fit_proximal_pl_constant(
        f_obj, h, lam, CASE2_OPTIMAL_ENVELOPE, -5.0, 5.0, samples=2000, seed=seed
    )
    monitor = envelope_objective(f_obj, h, lam, CASE2_OPTIMAL_ENVELOPE, pl_mu=fitted_mu)
    rng = np.random.default_rng(seed + 10)
    x0 = rng.uniform(-5.0, 5.0, size=4)
    cfg = IntegratorConfig(dt=1e-4, t_max=2.2, settle_tol=1e-7, record_stride=5)
    cop_bound = bounds.proximal_bound(fitted_mu, lam, lipschitz, 1.0, 1.0, 0.5, 2.0)
    fxtpgf = MethodSpec(
        name="fxtpgf",
        objective=monitor,
        flow=flows.proximal_flow(f_obj, h, lam, 1.0, 1.0, 0.5, 2.0, lipschitz),
        disturbance=DisturbanceModel.none(),
        config=cfg,
        x0s=(x0,),
        bound=bounds.SettlingBound(
            cop_bound, "proximal",
            {"mu": fitted_mu, "lam": lam, "lipschitz": lipschitz,
             "kappa_p": 1.0, "kappa_q": 1.0, "p": 0.5, "q": 2.0},
        ),
    )
    epgf = MethodSpec(
        name="epgf",
        objective=monitor,
        flow=flows.epgf_flow(f_obj, h, lam, lipschitz),
        disturbance=DisturbanceModel.none(),
        config=cfg,
        x0s=(x0,),
    )
    details = {
        "case": 2,
        "seed": seed,
        "A": A.tolist(),
        "b": b.tolist(),
        "gamma": 1.0,
        "box": [-5.0, 5.0],
        "lam": lam,
        "lipschitz": lipschitz,
        "fitted_mu": fitted_mu,
        "optimal_envelope": CASE2_OPTIMAL_ENVELOPE,
        "x0": x0.tolist(),
        "bound": cop_bound,
    }
    return CaseInstance(
        case_id=2,
        name="constrained lasso",
        methods=(fxtpgf, epgf),
        reference_solution=None,
        reference_value=CASE2_OPTIMAL_ENVELOPE,
        details=details,
    )


def case3_partitioned_system() -> network.PartitionedSystem:
    blocks = tuple(
        (CASE3_MATRIX[list(rows)], CASE3_RHS[list(rows)]) for rows in CASE3_ROW_GROUPS
    )
    return network.PartitionedSystem(blocks, mode="rows", delta=1.0)


def build_case3(seed: int = 0) -> CaseInstance:
    """Distributed and centralized linear-equation solving under disturbance.

    Four agents on a unit-weight circle share row blocks of a consistent
    system.  The componentwise sliding protocol and both centralized flows
    reject the sinusoidal disturbance; the edge-based projected baseline does
    not and stalls in a neighborhood.
    """
    sys = case3_partitioned_system()
    graph = network.cycle_graph(4)
    obj_d = network.row_partition_objective(sys, graph)
    obj_c = least_squares_objective(CASE3_MATRIX, CASE3_RHS, optimal_value=0.0)

    g_cw = protocols.signum(scale=3.0) + protocols.componentwise_power(1.5, scale=3.0)
    g_radial = protocols.rescaled(0.0, 2.0, scale=3.0) + protocols.power(1.5, 2.0, scale=3.0)

    rng = np.random.default_rng(seed + 3)
    x0_d = rng.uniform(-5.0, 5.0, size=obj_d.dim)
    x0_c = rng.uniform(-5.0, 5.0, size=5)
    x0_epa = rng.uniform(-5.0, 5.0, size=obj_d.dim)

    flow_cfg = IntegratorConfig(
        dt=5e-5, t_max=6.0, settle_tol=1e-3,
        chatter_regularization=1.5e-2, record_stride=10,
    )
    epa_cfg = IntegratorConfig(dt=1e-4, t_max=6.0, settle_tol=1e-3, record_stride=10)

    def dist_for(dim):
        return DisturbanceModel.sinusoid(0.2 * np.ones(dim), 1.0)

    sigma_d = protocols.class_constants(protocols.signum(scale=3.0), obj_d.dim).coefficient
    rho_d = protocols.class_constants(
        protocols.componentwise_power(1.5, scale=3.0), obj_d.dim
    ).coefficient
    bound_d = bounds.robust_bound(
        obj_d.pl_mu, sigma_d, rho_d, 1.5, 0.0, float(np.linalg.norm(0.2 * np.ones(obj_d.dim)))
    )

    distributed = MethodSpec(
        name="g_d",
        objective=obj_d,
        flow=network.row_partition_flow(sys, graph, g_cw),
        disturbance=dist_for(obj_d.dim),
        config=flow_cfg,
        x0s=(x0_d,),
        bound=bounds.SettlingBound(
            bound_d, "robust",
            {"mu": obj_d.pl_mu, "sigma": sigma_d, "rho": rho_d, "q": 1.5},
        ),
    )
    central_direct = MethodSpec(
        name="g_c1",
        objective=obj_c,
        flow=flows.first_order_flow(obj_c, g_cw),
        disturbance=dist_for(5),
        config=flow_cfg,
        x0s=(x0_c,),
    )
    central_residual = MethodSpec(
        name="g_c2",
        objective=obj_c,
        flow=flows.feasibility_flow(CASE3_MATRIX, CASE3_RHS, g_radial),
        disturbance=dist_for(5),
        config=flow_cfg,
        x0s=(x0_c,),
    )
    epa = MethodSpec(
        name="epa",
        objective=obj_d,
        flow=flows.epa_flow(list(sys.blocks), graph.neighbor_lists(), gain=3.0),
        disturbance=dist_for(obj_d.dim),
        config=epa_cfg,
        x0s=(x0_epa,),
        notes={"baseline": True},
    )
    details = {
        "case": 3,
        "seed": seed,
        "A": CASE3_MATRIX.tolist(),
        "b": CASE3_RHS.tolist(),
        "row_groups": [list(g) for g in CASE3_ROW_GROUPS],
        "delta": 1.0,
        "graph": "circle, 4 nodes, unit weights",
        "mu_distributed": obj_d.pl_mu,
        "mu_centralized": obj_c.pl_mu,
        "disturbance": "0.2*sin(t) on every component",
        "x0": {
            "g_d": x0_d.tolist(), "g_c1": x0_c.tolist(),
            "g_c2": x0_c.tolist(), "epa": x0_epa.tolist(),
        },
    }
    return CaseInstance(
        case_id=3,
        name="distributed linear equations",
        methods=(distributed, central_direct, central_residual, epa),
        reference_solution=None,
        reference_value=0.0,
        details=details,
    )


def dispatch_optimum(a: Array, b: Array, total: float) -> Array:
    """Equal-incremental-cost solution of the balance-constrained dispatch."""
    inv = 1.0 / (2.0 * a)
    lam_star = (total + float(np.sum(b * inv))) / float(np.sum(inv))
    return (lam_star - b) * inv


def build_case4() -> CaseInstance:
    """Economic dispatch over a four-unit network with a balance constraint.

    Two fixed-time projected flows (circle and complete Laplacian scalings)
    are compared against the sign projected flow and the plain
    Laplacian-gradient flow.  Starting from the local demands keeps the
    balance equation satisfied along all trajectories.
    """
    a, b_cost, c_cost, demand = CASE4_A, CASE4_B, CASE4_C, CASE4_DEMAND

    def f(x):
        return float(np.sum(a * x**2 + b_cost * x + c_cost))

    def grad(x):
        return 2.0 * a * np.asarray(x, dtype=float) + b_cost

    obj = Objective(
        dim=4, f=f, grad=grad,
        hessian=lambda x: np.diag(2.0 * a),
        pl_mu=float(2.0 * a.min()),
    )
    x_star = dispatch_optimum(a, b_cost, float(demand.sum()))
    L1 = network.cycle_graph(4).laplacian / 4.0
    L2 = network.complete_graph(4).laplacian / 4.0
    proj1 = network.dispatch_projection(L1)
    proj2 = network.dispatch_projection(L2)

    g_fxt = protocols.signum() + protocols.componentwise_power(1.5)
    cfg = IntegratorConfig(dt=1e-3, t_max=80.0, settle_tol=1e-9, record_stride=10)
    x0 = demand.copy()

    sigma = protocols.class_constants(protocols.signum(), 4).coefficient
    rho = protocols.class_constants(protocols.componentwise_power(1.5), 4).coefficient

    def fxt_method(name, proj):
        value = bounds.projected_bound(obj.pl_mu, proj.lambda2_gram, sigma, rho, 0.0, 1.5)
        return MethodSpec(
            name=name,
            objective=obj,
            flow=flows.projected_flow(obj, proj.matrix, g_fxt, strongly_convex=True),
            disturbance=DisturbanceModel.none(),
            config=cfg,
            x0s=(x0,),
            bound=bounds.SettlingBound(
                value, "projected",
                {"mu": obj.pl_mu, "lambda2_gram": proj.lambda2_gram,
                 "sigma": sigma, "rho": rho, "p": 0.0, "q": 1.5},
            ),
        )

    sign_baseline = MethodSpec(
        name="sign_L2",
        objective=obj,
        flow=flows.projected_flow(obj, L2, protocols.signum(), strongly_convex=True),
        disturbance=DisturbanceModel.none(),
        config=cfg,
        x0s=(x0,),
        notes={"baseline": True},
    )
    lap_gradient = MethodSpec(
        name="lapgrad_L2",
        objective=obj,
        flow=flows.projected_flow(obj, L2, protocols.identity(), strongly_convex=True),
        disturbance=DisturbanceModel.none(),
        config=cfg,
        x0s=(x0,),
        notes={"baseline": True, "rate": "exponential"},
    )
    details = {
        "case": 4,
        "a": a.tolist(),
        "b": b_cost.tolist(),
        "c": c_cost.tolist(),
        "demand": demand.tolist(),
        "L1": L1.tolist(),
        "L2": L2.tolist(),
        "lambda2": {"L1": proj1.lambda2, "L2": proj2.lambda2},
        "spectral_norm": {"L1": proj1.spectral_norm, "L2": proj2.spectral_norm},
        "x_star": x_star.tolist(),
        "reported_optimum": CASE4_REPORTED_OPTIMUM.tolist(),
        "x0": x0.tolist(),
    }
    return CaseInstance(
        case_id=4,
        name="economic dispatch",
        methods=(
            fxt_method("fxt_L1", proj1),
            fxt_method("fxt_L2", proj2),
            sign_baseline,
            lap_gradient,
        ),
        reference_solution=x_star,
        reference_value=f(x_star),
        details=details,
    )


def build_case(case_id: int, seed: int = 0) -> CaseInstance:
    if case_id == 1:
        return build_case1(seed)
    if case_id == 2:
        return build_case2(seed)
    if case_id == 3:
        return build_case3(seed)
    if case_id == 4:
        return build_case4()
    raise ValidationError("case_id must be 1, 2, 3, or 4")


def random_quadratic(n: int, mu_target: float, L_target: float, seed: int) -> Objective:
    """Random strongly convex quadratic with exact spectrum endpoints.

    A random orthogonal conjugation of a diagonal with spectrum spread
    linearly over [mu_target, L_target]; the PL constant is set to
    ``mu_target`` exactly.
    """
    if n < 1:
        raise ValidationError("n must be positive")
    if not 0.0 < mu_target <= L_target:
        raise ValidationError("need 0 < mu_target <= L_target")
    rng = np.random.default_rng(seed)
    spectrum = np.linspace(mu_target, L_target, n)
    if n == 1:
        Q = np.array([[mu_target]])
    else:
        V, _ = np.linalg.qr(rng.standard_normal((n, n)))
        Q = V @ np.diag(spectrum) @ V.T
        Q = 0.5 * (Q + Q.T)
    return quadratic_objective(Q).with_fields(pl_mu=mu_target)
