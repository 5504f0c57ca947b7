"""Static regret measurement and closed-form regret bounds.

The measured regret is the trapezoidal integral of the optimality gap along
a trajectory, stopped at the measured settling time when one exists.  The
bound table covers the plain gradient flow, the rescaled finite-time flow,
the two-term fixed-time flow (whose bound splits on ``beta = (q+1)/2``), and
the exponentially scaled flow whose bound is a constant.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import dynamics, flows, protocols
from .core import Array, Objective, Trajectory
from .errors import ValidationError

BOUND_KINDS = ("g1", "gp", "gpq_beta_lt2", "gpq_beta_eq2", "gpq_beta_gt2", "ge")


@dataclass(frozen=True)
class RegretReport:
    measured: float
    v0: float
    bound: float | None = None
    bound_kind: str | None = None

    def __post_init__(self):
        if self.bound_kind is not None and self.bound_kind not in BOUND_KINDS:
            raise ValidationError(f"unknown bound kind {self.bound_kind!r}")


def measure_regret(traj: Trajectory, f_star: float) -> float:
    """Trapezoidal integral of ``max(f(x(t)) - f_star, 0)``.

    Integration stops at the measured settling time when the trajectory has
    one; otherwise it runs to the final sample and a truncation warning is
    emitted.
    """
    if len(traj) == 0:
        raise ValidationError("trajectory is empty")
    times = traj.times
    gaps = np.maximum(traj.costs - f_star, 0.0)
    if traj.settling_time is not None:
        mask = times <= traj.settling_time
        times, gaps = times[mask], gaps[mask]
    else:
        warnings.warn(
            "trajectory never settled; regret truncated at the horizon",
            RuntimeWarning,
            stacklevel=2,
        )
    if len(times) < 2:
        return 0.0
    return float(np.trapezoid(gaps, times))


def _alpha_beta(mu: float, p: float | None, q: float | None):
    alpha = (p + 1.0) / 2.0 if p is not None else None
    beta = (q + 1.0) / 2.0 if q is not None else None
    a = (2.0 * mu) ** alpha if alpha is not None else None
    b = (2.0 * mu) ** beta if beta is not None else None
    return alpha, beta, a, b


def regret_bound(
    kind: str,
    v0: float,
    mu: float,
    p: float | None = None,
    q: float | None = None,
) -> float:
    """Closed-form regret bound for the given protocol family.

    For the two-term family with ``v0 <= 1`` the single-term bound applies;
    above 1 the bound splits on ``beta = (q+1)/2``.
    """
    if mu <= 0:
        raise ValidationError("mu must be positive")
    if v0 < 0:
        raise ValidationError("v0 must be nonnegative")
    if kind == "g1":
        return v0 / (2.0 * mu)
    if kind == "ge":
        return 1.0 / mu**2
    if kind == "gp":
        if p is None or not 0.0 <= p < 1.0:
            raise ValidationError("gp bound needs p in [0, 1)")
        alpha, _, a, _ = _alpha_beta(mu, p, None)
        return v0 ** (2.0 - alpha) / (a * (2.0 - alpha))
    if kind == "gpq":
        if p is None or not 0.0 <= p < 1.0:
            raise ValidationError("gpq bound needs p in [0, 1)")
        if q is None or not q > 1.0:
            raise ValidationError("gpq bound needs q > 1")
        alpha, beta, a, b = _alpha_beta(mu, p, q)
        if v0 <= 1.0:
            return v0 ** (2.0 - alpha) / (a * (2.0 - alpha))
        head = 1.0 / (a * (2.0 - alpha))
        if beta < 2.0:
            return head + v0 ** (2.0 - beta) / (b * (2.0 - beta))
        if beta == 2.0:
            return head + math.log1p(v0) / b
        return head + 1.0 / (b * (beta - 2.0))
    raise ValidationError(f"unknown regret bound kind {kind!r}")


def bound_kind_label(kind: str, q: float | None = None) -> str:
    """Report label for a bound, resolving the beta split for gpq."""
    if kind != "gpq":
        return kind
    beta = (q + 1.0) / 2.0
    if beta < 2.0:
        return "gpq_beta_lt2"
    if beta == 2.0:
        return "gpq_beta_eq2"
    return "gpq_beta_gt2"


def f_relaxation(v0: float, beta: float) -> float:
    """The sharp two-stage factor before relaxation.

    Defined for ``v0 > 0`` and ``beta != 2``; the table bounds relax it to
    ``1/(beta-2)`` for ``beta > 2`` and ``v0^(2-beta)/(2-beta)`` for
    ``beta`` in (1, 2).
    """
    if v0 <= 0:
        raise ValidationError("v0 must be positive")
    if beta == 2.0 or beta <= 1.0:
        raise ValidationError("beta must lie in (1, 2) or (2, inf)")
    num = (1.0 + v0 ** (beta - 1.0)) ** ((beta - 2.0) / (beta - 1.0)) - 1.0
    return num / (v0 ** (beta - 2.0) * (beta - 2.0))


def sharp_gpq_bound(v0: float, mu: float, p: float, q: float) -> float:
    """Two-stage regret bound for the two-term family, before relaxation."""
    alpha, beta, a, b = _alpha_beta(mu, p, q)
    if v0 <= 1.0:
        return v0 ** (2.0 - alpha) / (a * (2.0 - alpha))
    if beta == 2.0:
        return 1.0 / (a * (2.0 - alpha)) + math.log1p(v0) / b
    return 1.0 / (a * (2.0 - alpha)) + f_relaxation(v0, beta) / b


def protocol_for_kind(kind: str, p: float | None = None, q: float | None = None):
    """The protocol matching a regret-bound family."""
    if kind == "g1":
        return protocols.identity()
    if kind == "gp":
        return protocols.rescaled(p, 2.0)
    if kind == "gpq":
        return protocols.rescaled(p, 2.0) + protocols.power(q, 2.0)
    if kind == "ge":
        return protocols.exponential_l2()
    raise ValidationError(f"unknown regret kind {kind!r}")


@dataclass(frozen=True)
class ComplianceRow:
    x0: Array
    v0: float
    measured: float
    bound: float
    ok: bool


@dataclass(frozen=True)
class ComplianceTable:
    kind: str
    rows: tuple[ComplianceRow, ...]
    bound_grows_with_v0: bool

    @property
    def all_ok(self) -> bool:
        return all(r.ok for r in self.rows)


def regret_compliance(
    problem: Objective,
    kind: str,
    initializations,
    cfg: dynamics.IntegratorConfig,
    p: float | None = None,
    q: float | None = None,
) -> ComplianceTable:
    """Measure regret against its bound for each initialization.

    Rows record ``measured <= bound*1.05 + 1e-3``; the table also reports
    whether the bound itself grows with the initial gap (not every family
    has an initialization-free regret bound).
    """
    if problem.f_star is None or problem.pl_mu is None:
        raise ValidationError("compliance needs f_star and pl_mu on the problem")
    g = protocol_for_kind(kind, p, q)
    flow = flows.first_order_flow(problem, g)
    rows = []
    bounds_seen = []
    for x0 in initializations:
        x0 = np.asarray(x0, dtype=float)
        v0 = float(problem.f(x0)) - problem.f_star
        traj = dynamics.integrate(flow, x0, problem, dynamics.DisturbanceModel.none(), cfg)
        with warnings.catch_warnings():
            warnings.simplefilter("ignore", RuntimeWarning)
            measured = measure_regret(traj, problem.f_star)
        bound = regret_bound(kind, v0, problem.pl_mu, p, q)
        rows.append(
            ComplianceRow(x0, v0, measured, bound, measured <= bound * 1.05 + 1e-3)
        )
        bounds_seen.append((v0, bound))
    bounds_seen.sort()
    grows = any(
        b2 > b1 + 1e-12 for (_, b1), (_, b2) in zip(bounds_seen, bounds_seen[1:])
    )
    return ComplianceTable(kind, tuple(rows), grows)
