"""Proximal operators, Moreau envelope, and the forward-backward machinery.

Only separable prox kinds are packaged: the composite l1-plus-box prox is the
componentwise soft-threshold followed by a clamp, which is exact because the
one-dimensional objective is convex and a box is an interval.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import Array, Objective
from .errors import CertificateMissingError, ValidationError

PROX_KINDS = ("zero", "l1", "box_indicator", "l1_plus_box")


@dataclass(frozen=True)
class ProxFunction:
    """A proper, lower semicontinuous convex regularizer ``h``.

    ``gamma`` scales the l1 part; ``lower``/``upper`` bound the box part
    (componentwise, +-inf allowed).
    """

    kind: str
    gamma: float = 1.0
    lower: Array | float = -math.inf
    upper: Array | float = math.inf

    def __post_init__(self):
        if self.kind not in PROX_KINDS:
            raise ValidationError(f"unknown prox kind {self.kind!r}")
        if self.kind in ("l1", "l1_plus_box") and self.gamma <= 0:
            raise ValidationError("gamma must be positive")
        if self.kind in ("box_indicator", "l1_plus_box"):
            lo = np.asarray(self.lower, dtype=float)
            hi = np.asarray(self.upper, dtype=float)
            if np.any(lo >= hi):
                raise ValidationError("box needs lower < upper componentwise")


def zero_prox() -> ProxFunction:
    return ProxFunction("zero")


def l1(gamma: float = 1.0) -> ProxFunction:
    return ProxFunction("l1", gamma=float(gamma))


def box_indicator(lower, upper) -> ProxFunction:
    return ProxFunction("box_indicator", lower=lower, upper=upper)


def l1_plus_box(gamma: float, lower, upper) -> ProxFunction:
    return ProxFunction("l1_plus_box", gamma=float(gamma), lower=lower, upper=upper)


def soft_threshold(x: Array, t: float) -> Array:
    return np.sign(x) * np.maximum(np.abs(x) - t, 0.0)


def prox(h: ProxFunction, lam: float, x: Array) -> Array:
    """Closed-form proximal map of ``h`` at step ``lam``."""
    if lam <= 0:
        raise ValidationError("lam must be positive")
    x = np.asarray(x, dtype=float)
    if h.kind == "zero":
        return x.copy()
    if h.kind == "l1":
        return soft_threshold(x, lam * h.gamma)
    if h.kind == "box_indicator":
        return np.clip(x, h.lower, h.upper)
    return np.clip(soft_threshold(x, lam * h.gamma), h.lower, h.upper)


def h_value(h: ProxFunction, x: Array) -> float:
    """Value of the regularizer; +inf outside the box."""
    x = np.asarray(x, dtype=float)
    val = 0.0
    if h.kind in ("l1", "l1_plus_box"):
        val += h.gamma * float(np.sum(np.abs(x)))
    if h.kind in ("box_indicator", "l1_plus_box"):
        if np.any(x < np.asarray(h.lower) - 1e-12) or np.any(
            x > np.asarray(h.upper) + 1e-12
        ):
            return math.inf
    return val


def moreau(h: ProxFunction, lam: float, x: Array) -> float:
    """Moreau envelope value: the smoothed form of ``h`` at ``x``."""
    x = np.asarray(x, dtype=float)
    p = prox(h, lam, x)
    return h_value(h, p) + float(np.sum((p - x) ** 2)) / (2.0 * lam)


def moreau_gradient(h: ProxFunction, lam: float, x: Array) -> Array:
    """Gradient of the Moreau envelope, ``(x - prox(x))/lam``."""
    x = np.asarray(x, dtype=float)
    return (x - prox(h, lam, x)) / lam


def fb_residual(f_obj: Objective, h: ProxFunction, lam: float, x: Array) -> Array:
    """Forward-backward residual; vanishes exactly at minimizers of f + h."""
    if lam <= 0:
        raise ValidationError("lam must be positive")
    x = np.asarray(x, dtype=float)
    g = np.asarray(f_obj.grad(x), dtype=float)
    return (x - prox(h, lam, x - lam * g)) / lam


def fb_envelope(
    f_obj: Objective,
    h: ProxFunction,
    lam: float,
    x: Array,
    lipschitz: float | None = None,
) -> float:
    """Forward-backward envelope value at ``x``.

    The envelope is a smooth surrogate sharing minimizers and optimal value
    with ``f + h``; it needs ``lam`` in (0, 1/L) where L is the gradient
    Lipschitz constant, validated when ``lipschitz`` is supplied.
    """
    if lam <= 0:
        raise ValidationError("lam must be positive")
    if lipschitz is not None and lam >= 1.0 / lipschitz:
        raise ValidationError("lam must lie in (0, 1/L)")
    x = np.asarray(x, dtype=float)
    g = np.asarray(f_obj.grad(x), dtype=float)
    return (
        float(f_obj.f(x))
        + moreau(h, lam, x - lam * g)
        - 0.5 * lam * float(g @ g)
    )


def fb_envelope_gradient(f_obj: Objective, h: ProxFunction, lam: float, x: Array) -> Array:
    """Gradient of the envelope, ``(I - lam*hess f(x)) @ residual``."""
    if f_obj.hessian is None:
        raise CertificateMissingError("envelope gradient needs the Hessian of f")
    x = np.asarray(x, dtype=float)
    H = np.asarray(f_obj.hessian(x), dtype=float)
    r = fb_residual(f_obj, h, lam, x)
    return r - lam * (H @ r)


def proximal_pl_residual(
    f_obj: Objective,
    h: ProxFunction,
    lam: float,
    mu: float,
    x: Array,
    envelope_star: float | None,
) -> float:
    """Slack of the proximal gradient-domination inequality at ``x``.

    Returns ``0.5*||residual||^2 - mu*(envelope(x) - envelope_star)``.
    """
    if envelope_star is None:
        raise CertificateMissingError("proximal PL residual needs the optimal envelope value")
    r = fb_residual(f_obj, h, lam, x)
    gap = fb_envelope(f_obj, h, lam, x) - envelope_star
    return 0.5 * float(r @ r) - mu * gap


def fit_proximal_pl_constant(
    f_obj: Objective,
    h: ProxFunction,
    lam: float,
    envelope_star: float,
    lower,
    upper,
    samples: int = 10_000,
    seed: int = 0,
) -> float:
    """Largest constant keeping the proximal PL residual nonnegative on samples.

    Samples uniformly from the box [lower, upper] and returns the infimum of
    ``0.5*||residual||^2 / (envelope - envelope_star)`` over samples with a
    meaningful gap.
    """
    rng = np.random.default_rng(seed)
    lo = np.broadcast_to(np.asarray(lower, dtype=float), (f_obj.dim,))
    hi = np.broadcast_to(np.asarray(upper, dtype=float), (f_obj.dim,))
    best = math.inf
    for _ in range(samples):
        x = rng.uniform(lo, hi)
        gap = fb_envelope(f_obj, h, lam, x) - envelope_star
        if gap <= 1e-9:
            continue
        r = fb_residual(f_obj, h, lam, x)
        best = min(best, 0.5 * float(r @ r) / gap)
    if not math.isfinite(best):
        raise ValidationError("no sample produced a meaningful envelope gap")
    return best
