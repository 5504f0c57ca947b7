"""Constructors assembling each flow variant into a right-hand-side callable.

Every constructor returns a :class:`FlowSpec`, a callable ``(x, t) -> xdot``
carrying the variant name and any construction-time diagnostics (such as the
robustness condition report).  Construction validates the variant's
structural preconditions; evaluation itself is pure.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from . import protocols, proximal
from .core import Array, Objective
from .dynamics import ConditionReport, DisturbanceModel, robust_condition_check
from .errors import (
    InfeasibilityError,
    InvalidProjectionError,
    SingularHessianError,
    ValidationError,
)
from .protocols import ProtocolLike

TIME_DERIVATIVE_STEP = 1e-6
PIVOT_TOL = 1e-12
PROJECTION_TOL = 1e-10


@dataclass(frozen=True)
class FlowSpec:
    """A flow right-hand side with construction metadata."""

    variant: str
    rhs: Callable[[Array, float], Array]
    dim: int
    condition: ConditionReport | None = None
    info: dict = field(default_factory=dict)

    def __call__(self, x: Array, t: float = 0.0) -> Array:
        return self.rhs(x, t)


@dataclass(frozen=True)
class TimeVaryingObjective:
    """Cost family ``f(x, t)`` with curvature and optional gradient time slope.

    When ``grad_time_derivative`` is absent it is approximated by central
    differencing in t with step ``TIME_DERIVATIVE_STEP``.
    """

    dim: int
    f: Callable[[Array, float], float]
    grad: Callable[[Array, float], Array]
    hessian: Callable[[Array, float], Array]
    grad_time_derivative: Callable[[Array, float], Array] | None = None

    def grad_dt(self, x: Array, t: float) -> Array:
        if self.grad_time_derivative is not None:
            return np.asarray(self.grad_time_derivative(x, t), dtype=float)
        s = TIME_DERIVATIVE_STEP
        return (np.asarray(self.grad(x, t + s)) - np.asarray(self.grad(x, t - s))) / (2.0 * s)


def _solve_spd(H: Array, rhs_vec: Array, state: Array) -> Array:
    """Solve ``H z = rhs_vec`` for symmetric positive definite H."""
    try:
        L = np.linalg.cholesky(H)
    except np.linalg.LinAlgError as exc:
        raise SingularHessianError(state) from exc
    pivots = np.diag(L) ** 2
    if pivots.min() <= PIVOT_TOL * pivots.max():
        raise SingularHessianError(state)
    z = np.linalg.solve(L, rhs_vec)
    return np.linalg.solve(L.T, z)


def first_order_flow(obj: Objective, g: ProtocolLike) -> FlowSpec:
    """Gradient flow reshaped by a protocol: ``xdot = -g(grad f(x))``."""

    def rhs(x, t):
        return -protocols.eval(g, obj.grad(x))

    return FlowSpec("first_order", rhs, obj.dim, info={"protocol": protocols.to_config(g)})


def robust_flow(
    obj: Objective,
    g0: protocols.Protocol,
    gq: protocols.Protocol,
    dist: DisturbanceModel | None = None,
    safety_multiplier: float = 1.0,
) -> FlowSpec:
    """Disturbance-rejecting flow with a sliding term plus a high-exponent term.

    ``g0`` must have class exponent 0 (the sliding term rejecting the bounded
    disturbance part).  When a disturbance model is supplied, the robustness
    condition is evaluated against the objective's PL constant and recorded
    on the returned spec.
    """
    consts0 = protocols.class_constants(g0, obj.dim)
    if isinstance(consts0, protocols.GlobalBoundMarker) or consts0.exponent != 0.0:
        raise ValidationError(
            "robust flow needs a sliding term with class exponent 0"
        )
    constsq = protocols.class_constants(gq, obj.dim)
    condition = None
    if dist is not None and not isinstance(constsq, protocols.GlobalBoundMarker):
        if obj.pl_mu is None:
            raise ValidationError("robust condition check needs obj.pl_mu")
        condition = robust_condition_check(
            (consts0.coefficient, constsq.coefficient, constsq.exponent),
            dist,
            obj.pl_mu,
            safety_multiplier,
        )

    def rhs(x, t):
        y = obj.grad(x)
        return -(protocols.eval(g0, y) + protocols.eval(gq, y))

    return FlowSpec(
        "robust",
        rhs,
        obj.dim,
        condition=condition,
        info={"g0": protocols.to_config(g0), "gq": protocols.to_config(gq)},
    )


def newton_flow(obj: Objective, g: ProtocolLike) -> FlowSpec:
    """Curvature-scaled flow: ``xdot = -hess(x)^{-1} g(grad f(x))``."""
    if obj.hessian is None:
        raise ValidationError("newton flow needs obj.hessian")

    def rhs(x, t):
        x = np.asarray(x, dtype=float)
        y = protocols.eval(g, obj.grad(x))
        return -_solve_spd(np.asarray(obj.hessian(x), dtype=float), y, x)

    return FlowSpec("newton", rhs, obj.dim, info={"protocol": protocols.to_config(g)})


def time_varying_newton_flow(obj_t: TimeVaryingObjective, g: ProtocolLike) -> FlowSpec:
    """Tracking flow for a time-varying cost; settles onto the moving optimum."""

    def rhs(x, t):
        x = np.asarray(x, dtype=float)
        y = np.asarray(obj_t.grad(x, t), dtype=float)
        drive = protocols.eval(g, y) + obj_t.grad_dt(x, t)
        return -_solve_spd(np.asarray(obj_t.hessian(x, t), dtype=float), drive, x)

    return FlowSpec("time_varying_newton", rhs, obj_t.dim)


def orthogonal_projector(A: Array) -> Array:
    """Orthogonal projector onto the null space of ``A``.

    A row subset of rank equal to rank(A) is selected by pivoted
    orthogonalization (deterministic given A, relative cutoff
    ``PROJECTION_TOL``); the projector is symmetric, idempotent, and its
    nonzero singular values are all 1.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    scale = np.linalg.norm(A)
    if scale == 0.0:
        raise ValidationError("A is numerically zero")
    # Pivoted Gram-Schmidt over the rows of A picks an independent row subset
    # deterministically: greedily the row with the largest residual norm,
    # until the residuals drop below the cutoff.
    residual = A.copy()
    rows = []
    threshold = PROJECTION_TOL * np.linalg.norm(A, 2)
    for _ in range(min(A.shape)):
        norms = np.linalg.norm(residual, axis=1)
        i = int(np.argmax(norms))
        if norms[i] <= threshold:
            break
        v = residual[i] / norms[i]
        rows.append(i)
        residual = residual - np.outer(residual @ v, v)
    if not rows:
        raise ValidationError("A is numerically zero")
    sub = A[sorted(rows)]
    n = A.shape[1]
    P = np.eye(n) - sub.T @ np.linalg.solve(sub @ sub.T, sub)
    # One symmetrization pass keeps the idempotence defect at round-off level.
    P = 0.5 * (P + P.T)
    return P


def _rank(M: Array) -> int:
    s = np.linalg.svd(M, compute_uv=False)
    if s.size == 0 or s[0] == 0.0:
        return 0
    return int(np.sum(s > PROJECTION_TOL * s[0]))


def projected_flow(
    obj: Objective,
    P: Array,
    g: ProtocolLike,
    A: Array | None = None,
    strongly_convex: bool = False,
) -> FlowSpec:
    """Flow confined to an affine set via a projection matrix.

    The fixed-time analysis of this variant needs a strongly convex cost;
    the caller asserts that with ``strongly_convex=True``.  When ``A`` is
    supplied, ``range(P) = null(A)`` is verified.  For a symmetric idempotent
    ``P`` and a radial protocol the simplified form ``-g(P grad f)`` is used.
    """
    if not strongly_convex:
        raise ValidationError(
            "projected flow analysis assumes a strongly convex cost; "
            "pass strongly_convex=True to assert it"
        )
    P = np.asarray(P, dtype=float)
    if P.shape != (obj.dim, obj.dim):
        raise ValidationError("P must be square with the objective dimension")
    if A is not None:
        A = np.atleast_2d(np.asarray(A, dtype=float))
        defect = np.linalg.norm(A @ P)
        if defect > PROJECTION_TOL * np.linalg.norm(A) * max(np.linalg.norm(P), 1e-300):
            raise InvalidProjectionError("A @ P is not numerically zero")
        if _rank(P) != obj.dim - _rank(A):
            raise InvalidProjectionError("rank(P) must equal dim - rank(A)")

    symmetric = np.linalg.norm(P - P.T) <= 1e-12 * max(np.linalg.norm(P), 1e-300)
    idempotent = np.linalg.norm(P @ P - P) <= PROJECTION_TOL * max(np.linalg.norm(P), 1e-300)
    if symmetric and idempotent and protocols.is_radial(g):
        def rhs(x, t):
            return -protocols.eval(g, P @ obj.grad(x))
        simplified = True
    else:
        Pt = P.T
        def rhs(x, t):
            return -(P @ protocols.eval(g, Pt @ obj.grad(x)))
        simplified = False

    return FlowSpec(
        "projected", rhs, obj.dim,
        info={"simplified": simplified, "protocol": protocols.to_config(g)},
    )


def feasibility_flow(A: Array, b: Array, g_hat: ProtocolLike) -> FlowSpec:
    """Flow settling onto the solution set of a consistent ``Ax = b``.

    ``g_hat`` must map its argument into ``span{y}`` (structural check by
    kind), which rules out componentwise protocols here.
    """
    A = np.atleast_2d(np.asarray(A, dtype=float))
    b = np.asarray(b, dtype=float)
    if b.shape != (A.shape[0],):
        raise ValidationError("b has the wrong shape")
    if not protocols.is_radial(g_hat):
        raise ValidationError("feasibility flow needs a protocol with outputs in span{y}")
    x_ls, *_ = np.linalg.lstsq(A, b, rcond=None)
    if np.linalg.norm(A @ x_ls - b) > 1e-8 * max(np.linalg.norm(b), 1.0):
        raise InfeasibilityError("b is not in the range of A")
    At = A.T

    def rhs(x, t):
        return -(At @ protocols.eval(g_hat, A @ x - b))

    return FlowSpec("feasibility", rhs, A.shape[1], info={"protocol": protocols.to_config(g_hat)})


def free_init_flow(
    obj: Objective,
    A: Array,
    b: Array,
    P: Array,
    g: ProtocolLike,
    g_hat: ProtocolLike,
    strongly_convex: bool = False,
) -> FlowSpec:
    """Projected flow plus a feasibility-restoring term; any initialization.

    The feasibility term settles ``Ax = b`` in fixed time and vanishes on the
    feasible set (where ``A @ P = 0`` keeps it invariant); afterwards the
    projected dynamics dominates.
    """
    proj = projected_flow(obj, P, g, A=A, strongly_convex=strongly_convex)
    feas = feasibility_flow(A, b, g_hat)

    def rhs(x, t):
        return proj.rhs(x, t) + feas.rhs(x, t)

    return FlowSpec("free_init", rhs, obj.dim, info={**proj.info, "feasibility": feas.info})


def proximal_flow(
    f_obj: Objective,
    h: proximal.ProxFunction,
    lam: float,
    kappa_p: float,
    kappa_q: float,
    p: float,
    q: float,
    lipschitz: float,
) -> FlowSpec:
    """Fixed-time flow on the forward-backward residual of ``f + h``."""
    if not 0.0 < lam < 1.0 / lipschitz:
        raise ValidationError("lam must lie in (0, 1/L)")
    if not 0.0 <= p < 1.0:
        raise ValidationError("p must lie in [0, 1)")
    if not q > 1.0:
        raise ValidationError("q must be greater than 1")
    if kappa_p <= 0 or kappa_q <= 0:
        raise ValidationError("kappa_p and kappa_q must be positive")

    def rhs(x, t):
        r = proximal.fb_residual(f_obj, h, lam, x)
        nr = float(np.linalg.norm(r))
        if nr == 0.0:
            return np.zeros_like(r)
        eps = protocols.current_regularization()
        return -kappa_p * r / (nr + eps) ** (1.0 - p) - kappa_q * nr ** (q - 1.0) * r

    return FlowSpec(
        "proximal", rhs, f_obj.dim,
        info={"lam": lam, "kappa_p": kappa_p, "kappa_q": kappa_q, "p": p, "q": q},
    )


def epgf_flow(
    f_obj: Objective,
    h: proximal.ProxFunction,
    lam: float,
    lipschitz: float,
) -> FlowSpec:
    """Exponentially convergent proximal gradient flow baseline."""
    if not 0.0 < lam < 1.0 / lipschitz:
        raise ValidationError("lam must lie in (0, 1/L)")

    def rhs(x, t):
        return -proximal.fb_residual(f_obj, h, lam, x)

    return FlowSpec("epgf", rhs, f_obj.dim, info={"lam": lam})


def _sgn_pow(y: Array, a: float) -> Array:
    return np.sign(y) * np.abs(y) ** a


def epa_flow(
    blocks: Sequence[tuple[Array, Array]],
    neighbors: Sequence[Sequence[int]],
    gain: float = 3.0,
) -> FlowSpec:
    """Edge-based projected baseline for row-partitioned linear equations.

    Each agent keeps a full copy of the unknown; its block ``(A_i, b_i)``
    must have full row rank so the local orthogonal projector exists.  The
    consensus term combines the 0.5- and 1.5-power components attractively
    (the published variant with a repulsive high-power term escapes to
    infinity from generic initializations).  Not disturbance-rejecting:
    under persistent perturbations the states stall in a neighborhood of the
    solution.
    """
    mats = []
    n = None
    for A_i, b_i in blocks:
        A_i = np.atleast_2d(np.asarray(A_i, dtype=float))
        b_i = np.atleast_1d(np.asarray(b_i, dtype=float))
        if n is None:
            n = A_i.shape[1]
        elif A_i.shape[1] != n:
            raise ValidationError("agent blocks must share the column dimension")
        if _rank(A_i) < A_i.shape[0]:
            raise ValidationError("each agent block must have full row rank")
        P_i = np.eye(n) - A_i.T @ np.linalg.solve(A_i @ A_i.T, A_i)
        mats.append((A_i, b_i, P_i))
    N = len(mats)
    if len(neighbors) != N:
        raise ValidationError("neighbor lists must match the number of agents")

    def rhs(x, t):
        x = np.asarray(x, dtype=float).reshape(N, n)
        out = np.zeros_like(x)
        for i, (A_i, b_i, P_i) in enumerate(mats):
            cons = np.zeros(n)
            for j in neighbors[i]:
                diff = x[i] - x[j]
                cons += _sgn_pow(diff, 0.5) + _sgn_pow(diff, 1.5)
            res = A_i @ x[i] - b_i
            out[i] = -gain * (P_i @ cons) - gain * (
                A_i.T @ (_sgn_pow(res, 0.5) + _sgn_pow(res, 1.5))
            )
        return out.reshape(-1)

    return FlowSpec("epa", rhs, N * n, info={"gain": gain})
