"""Fixed-step integration of (possibly discontinuous) flow right-hand sides.

The integrator is explicit forward Euler on a fixed recording grid.  A move
cap bounds the state displacement of any single update: when one Euler update
would move the state farther than ``max_move``, the step is split into
within-step substeps of that length.  This leaves the scheme exactly plain
Euler whenever ``dt*||rhs||`` is below the cap (in particular near sliding
sets, where the chattering analysis relies on it) while keeping the stiff
far-field transients of fixed-time flows stable at practical step sizes.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .core import Array, Objective, Trajectory
from .errors import ConfigurationError, DivergenceError, ValidationError
from .protocols import sign_regularization

RhsCallable = Callable[[Array, float], Array]

# Substep budget for one recording step of the move-capped Euler scheme.
_MAX_SUBSTEPS = 100_000


@dataclass(frozen=True)
class DisturbanceModel:
    """Additive perturbation ``d(x, t)`` with envelope parameters.

    ``epsilon`` is the slope of the state-vanishing part and ``dbar`` the
    magnitude of the bounded part, so that ``||d(x,t)|| <= epsilon*||x-[x]*||
    + dbar`` for the packaged kinds.
    """

    kind: str
    epsilon: float = 0.0
    dbar: float = 0.0
    amplitude: Array | None = None
    frequency: float = 1.0
    direction_rule: Callable[[Array, float], Array] | None = None
    fn: Callable[[Array, float], Array] | None = None

    def __post_init__(self):
        if self.kind not in ("none", "sinusoid", "state_scaled_plus_bounded", "custom"):
            raise ValidationError(f"unknown disturbance kind {self.kind!r}")
        if self.epsilon < 0 or self.dbar < 0:
            raise ValidationError("envelope parameters must be nonnegative")

    @staticmethod
    def none() -> "DisturbanceModel":
        return DisturbanceModel("none")

    @staticmethod
    def sinusoid(amplitude, frequency: float = 1.0) -> "DisturbanceModel":
        amp = np.asarray(amplitude, dtype=float)
        return DisturbanceModel(
            "sinusoid",
            epsilon=0.0,
            dbar=float(np.linalg.norm(amp)),
            amplitude=amp,
            frequency=float(frequency),
        )

    @staticmethod
    def state_scaled(
        epsilon: float,
        dbar: float,
        direction_rule: Callable[[Array, float], Array],
    ) -> "DisturbanceModel":
        return DisturbanceModel(
            "state_scaled_plus_bounded",
            epsilon=float(epsilon),
            dbar=float(dbar),
            direction_rule=direction_rule,
        )

    @staticmethod
    def custom(fn, epsilon: float = 0.0, dbar: float = 0.0) -> "DisturbanceModel":
        return DisturbanceModel("custom", epsilon=float(epsilon), dbar=float(dbar), fn=fn)


def resolve_disturbance(dist: DisturbanceModel, obj: Objective) -> RhsCallable | None:
    """Turn a disturbance model into a callable ``d(x, t)``; None when absent."""
    if dist.kind == "none":
        return None
    if dist.kind == "sinusoid":
        amp, freq = dist.amplitude, dist.frequency

        def d_sin(x, t):
            return amp * math.sin(freq * t)

        return d_sin
    if dist.kind == "state_scaled_plus_bounded":
        if obj.minimizer_projection is None:
            raise ConfigurationError(
                "state-scaled disturbance needs obj.minimizer_projection"
            )
        project = obj.minimizer_projection
        eps, dbar, rule = dist.epsilon, dist.dbar, dist.direction_rule

        def d_scaled(x, t):
            u = np.asarray(rule(x, t), dtype=float)
            norm_u = np.linalg.norm(u)
            if norm_u == 0.0:
                return np.zeros_like(x)
            mag = eps * np.linalg.norm(x - project(x)) + dbar
            return (mag / norm_u) * u

        return d_scaled
    return dist.fn


@dataclass(frozen=True)
class IntegratorConfig:
    """Step size, horizon, tolerances, and recording layout for one run."""

    dt: float
    t_max: float
    settle_tol: float = 1e-6
    chatter_regularization: float = 0.0
    record_stride: int = 1
    seed: int = 0
    max_move: float = 0.5

    def __post_init__(self):
        if self.dt <= 0:
            raise ValidationError("dt must be positive")
        if self.t_max <= 0:
            raise ValidationError("t_max must be positive")
        if self.dt > self.t_max:
            raise ValidationError("dt must not exceed t_max")
        if self.settle_tol <= 0:
            raise ValidationError("settle_tol must be positive")
        if self.chatter_regularization < 0:
            raise ValidationError("chatter_regularization must be nonnegative")
        if self.record_stride < 1 or self.record_stride != int(self.record_stride):
            raise ValidationError("record_stride must be a positive integer")
        if self.record_stride * self.dt > self.t_max:
            raise ValidationError("record_stride*dt must not exceed t_max")
        if self.max_move <= 0:
            raise ValidationError("max_move must be positive")


def integrate(
    rhs: RhsCallable,
    x0: Array,
    obj: Objective,
    dist: DisturbanceModel,
    cfg: IntegratorConfig,
) -> Trajectory:
    """Integrate ``xdot = rhs(x, t) + d(x, t)`` and record a trajectory.

    Records every ``record_stride``-th Euler step (plus the initial state),
    sets ``settling_time`` to the first recorded time at which the gradient
    norm drops to ``settle_tol``, and terminates early after settling when no
    disturbance is present.  A non-finite state raises
    :class:`DivergenceError` carrying the blow-up time.
    """
    x = np.array(x0, dtype=float)
    if x.shape != (obj.dim,):
        raise ValidationError(f"x0 must have shape ({obj.dim},)")
    if not np.all(np.isfinite(x)):
        raise ValidationError("x0 must be finite")
    d_fn = resolve_disturbance(dist, obj)

    dt = cfg.dt
    cap = cfg.max_move
    n_steps = max(1, int(round(cfg.t_max / dt)))
    stride = cfg.record_stride

    times = [0.0]
    states = [x.copy()]
    costs = [float(obj.f(x))]
    grad_norms = [float(np.linalg.norm(obj.grad(x)))]
    settling = 0.0 if grad_norms[0] <= cfg.settle_tol else None

    if settling is not None and d_fn is None:
        return Trajectory(
            np.asarray(times), np.asarray(states), np.asarray(costs),
            np.asarray(grad_norms), settling_time=settling,
        )

    with np.errstate(all="ignore"), sign_regularization(cfg.chatter_regularization):
        for k in range(n_steps):
            t = k * dt
            remaining = dt
            # Diverging dynamics would otherwise shrink substeps forever, so
            # after a generous budget the remaining time is taken in one
            # plain step and the blow-up surfaces at the next recording.
            for _ in range(_MAX_SUBSTEPS):
                v = rhs(x, t)
                if d_fn is not None:
                    v = v + d_fn(x, t)
                move = float(np.linalg.norm(v)) * remaining
                if move <= cap or not math.isfinite(move):
                    x = x + remaining * v
                    remaining = 0.0
                    break
                h = cap * remaining / move
                x = x + h * v
                t += h
                remaining -= h
            if remaining > 0.0:
                v = rhs(x, t)
                if d_fn is not None:
                    v = v + d_fn(x, t)
                x = x + remaining * v
            if (k + 1) % stride == 0 or k == n_steps - 1:
                t_rec = (k + 1) * dt
                if not np.all(np.isfinite(x)):
                    raise DivergenceError(t_rec)
                times.append(t_rec)
                states.append(x.copy())
                costs.append(float(obj.f(x)))
                gnorm = float(np.linalg.norm(obj.grad(x)))
                grad_norms.append(gnorm)
                if settling is None and gnorm <= cfg.settle_tol:
                    settling = t_rec
                    if d_fn is None:
                        break

    return Trajectory(
        np.asarray(times), np.asarray(states), np.asarray(costs),
        np.asarray(grad_norms), settling_time=settling,
    )


def measure_settling(traj: Trajectory, tol: float) -> float | None:
    """First sampled time with gradient norm at or below ``tol``, if any."""
    if len(traj) == 0:
        raise ValidationError("trajectory is empty")
    hits = np.nonzero(traj.grad_norms <= tol)[0]
    if hits.size == 0:
        return None
    return float(traj.times[hits[0]])


@dataclass(frozen=True)
class ConditionReport:
    """Outcome of the robust settling condition check.

    ``k1``/``k2`` are the disturbance-adjusted coefficients, ``bound`` the
    resulting settling bound (infinite when the condition fails or is
    marginal).
    """

    k1: float
    k2: float
    bound: float
    passed: bool
    marginal: bool


def robust_condition_check(
    protocol_constants: tuple[float, float, float],
    dist: DisturbanceModel,
    mu: float,
    safety_multiplier: float = 1.0,
) -> ConditionReport:
    """Check the disturbance-rejection margins of a sliding-mode protocol.

    ``protocol_constants`` is ``(sigma, rho, q)``.  ``safety_multiplier``
    scales the vanishing-disturbance threshold ``epsilon/(2*sqrt(mu))``; the
    value 4 recovers the condition implied by the standard quadratic-growth
    constant (see the growth-ratio diagnostics in :mod:`fxtflows.core`).
    """
    if mu <= 0:
        raise ValidationError("mu must be positive")
    sigma, rho, q = protocol_constants
    vanish = safety_multiplier * dist.epsilon / (2.0 * math.sqrt(mu))
    k1 = sigma - dist.dbar - vanish
    k2 = rho - vanish
    passed = k1 > 0 and k2 >= 0
    marginal = passed and k2 == 0
    if k1 > 0 and k2 > 0:
        bound = 1.0 / (mu * k1) + 1.0 / (mu * k2 * (q - 1.0))
    else:
        bound = math.inf
    return ConditionReport(k1, k2, bound, passed, marginal)
