"""Closed-form settling-time bound calculators.

Every function takes explicit scalar parameters and returns seconds, keeping
each formula auditable in isolation; callers compose them with protocol class
constants and eigensolves.  A bound of ``inf`` signals a marginal robustness
condition rather than an error.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import ValidationError


@dataclass(frozen=True)
class SettlingBound:
    """A theoretical settling bound paired with its source and parameters."""

    value: float
    source: str
    parameters: dict = field(default_factory=dict)

    def __post_init__(self):
        if not self.value > 0:
            raise ValidationError("settling bound must be positive")


def _check_positive(**kwargs):
    for name, val in kwargs.items():
        if not val > 0:
            raise ValidationError(f"{name} must be positive")


def _check_exponents(p: float, q: float):
    if not 0.0 <= p < 1.0:
        raise ValidationError("p must lie in [0, 1)")
    if not q > 1.0:
        raise ValidationError("q must be greater than 1")


def lemma2_bound(c1: float, c2: float, r1: float, r2: float, k: float) -> float:
    """Generic two-term fixed-time bound from the comparison lemma."""
    _check_positive(c1=c1, c2=c2, k=k)
    if r1 < 0 or not r1 * k < 1.0:
        raise ValidationError("need 0 <= r1*k < 1")
    if not r2 * k > 1.0:
        raise ValidationError("need r2*k > 1")
    return 1.0 / (c1**k * (1.0 - r1 * k)) + 1.0 / (c2**k * (r2 * k - 1.0))


def nominal_bound(mu: float, sigma: float, rho: float, p: float, q: float) -> float:
    """First-order fixed-time bound under gradient domination."""
    _check_positive(mu=mu, sigma=sigma, rho=rho)
    _check_exponents(p, q)
    return 1.0 / (mu * sigma * (1.0 - p)) + 1.0 / (mu * rho * (q - 1.0))


def robust_bound(
    mu: float, sigma: float, rho: float, q: float, eps: float, dbar: float
) -> float:
    """Sliding-mode bound under mixed vanishing and bounded disturbances.

    Returns ``inf`` when the vanishing-disturbance margin ``k2`` is exactly
    zero (marginal condition); raises when the bounded-disturbance margin
    ``k1`` is not strictly positive.
    """
    _check_positive(mu=mu, sigma=sigma, rho=rho)
    if eps < 0 or dbar < 0:
        raise ValidationError("disturbance envelope parameters must be nonnegative")
    if not q > 1.0:
        raise ValidationError("q must be greater than 1")
    vanish = eps / (2.0 * math.sqrt(mu))
    k1 = sigma - dbar - vanish
    k2 = rho - vanish
    if k1 <= 0:
        raise ValidationError("disturbance rejection requires sigma > dbar + eps/(2*sqrt(mu))")
    if k2 < 0:
        raise ValidationError("disturbance rejection requires rho >= eps/(2*sqrt(mu))")
    if k2 == 0:
        return math.inf
    return 1.0 / (mu * k1) + 1.0 / (mu * k2 * (q - 1.0))


def newton_bound(sigma: float, rho: float, p: float, q: float) -> float:
    """Curvature-scaled flow bound; independent of the PL constant."""
    _check_positive(sigma=sigma, rho=rho)
    _check_exponents(p, q)
    return 1.0 / (sigma * (1.0 - p)) + 1.0 / (rho * (q - 1.0))


def exponential_bound(alpha: float, mu: float, variant: str = "l2", n: int = 1) -> float:
    """Global bound for the exponentially scaled protocols.

    ``1/(alpha*mu)`` for the l2 form and ``n/(alpha*mu)`` for the
    componentwise form.  Inverting for a prescribed time T gives
    ``alpha = 1/(T*mu)``.
    """
    _check_positive(alpha=alpha, mu=mu)
    if variant == "l2":
        return 1.0 / (alpha * mu)
    if variant == "l1":
        if n < 1:
            raise ValidationError("n must be a positive integer")
        return n / (alpha * mu)
    raise ValidationError("variant must be 'l2' or 'l1'")


def prescribed_time_gain(target_time: float, mu: float) -> float:
    """Scale making the l2 exponential flow settle within ``target_time``."""
    _check_positive(target_time=target_time, mu=mu)
    return 1.0 / (target_time * mu)


def finite_time_bound(mu: float, sigma: float, p: float, v0: float) -> float:
    """Finite-time bound for a single low-exponent protocol; grows with v0."""
    _check_positive(mu=mu, sigma=sigma)
    if not 0.0 <= p < 1.0:
        raise ValidationError("p must lie in [0, 1)")
    if v0 < 0:
        raise ValidationError("v0 must be nonnegative")
    return (2.0 * mu * v0) ** ((1.0 - p) / 2.0) / (mu * sigma * (1.0 - p))


def projected_bound(
    mu: float, lambda2: float, sigma: float, rho: float, p: float, q: float
) -> float:
    """Bound for projected flows on a linear-equality feasible set.

    ``lambda2`` is the smallest nonzero eigenvalue of the projection Gram
    matrix; it scales the gradient-domination constant of the reduced
    problem.
    """
    _check_positive(mu=mu, lambda2=lambda2, sigma=sigma, rho=rho)
    _check_exponents(p, q)
    return (1.0 / (mu * lambda2)) * (
        1.0 / (sigma * (1.0 - p)) + 1.0 / (rho * (q - 1.0))
    )


def feasibility_bound(
    sigma: float, rho: float, p: float, q: float, lambda2: float
) -> float:
    """Bound for reaching a consistent linear system Ax = b.

    ``lambda2`` is the smallest nonzero eigenvalue of ``A A^T``.
    """
    _check_positive(sigma=sigma, rho=rho, lambda2=lambda2)
    _check_exponents(p, q)
    return 1.0 / (sigma * lambda2 * (1.0 - p)) + 1.0 / (rho * lambda2 * (q - 1.0))


def proximal_bound(
    mu: float,
    lam: float,
    lipschitz: float,
    kappa_p: float,
    kappa_q: float,
    p: float,
    q: float,
) -> float:
    """Bound for the proximal flow on composite problems."""
    _check_positive(mu=mu, lam=lam, lipschitz=lipschitz, kappa_p=kappa_p, kappa_q=kappa_q)
    _check_exponents(p, q)
    if lam * lipschitz >= 1.0:
        raise ValidationError("lam must lie in (0, 1/L)")
    return (1.0 / (mu * (1.0 - lam * lipschitz))) * (
        1.0 / (kappa_p * (1.0 - p)) + 1.0 / (kappa_q * (q - 1.0))
    )


def consensus_bound(lambda2: float, sigma: float, rho: float, p: float, q: float) -> float:
    """Fixed-time consensus bound scaled by the algebraic connectivity."""
    _check_positive(lambda2=lambda2, sigma=sigma, rho=rho)
    _check_exponents(p, q)
    return 1.0 / (lambda2 * sigma * (1.0 - p)) + 1.0 / (lambda2 * rho * (q - 1.0))


def consensus_exponential_bound(n_agents: int, alpha: float, lambda2: float) -> float:
    """Consensus bound for the componentwise exponential protocol."""
    _check_positive(alpha=alpha, lambda2=lambda2)
    if n_agents < 1:
        raise ValidationError("n_agents must be a positive integer")
    return n_agents / (alpha * lambda2)


def consensus_robust_bound(
    lambda2: float, sigma: float, rho: float, q: float, eps: float, dbar: float
) -> float:
    """Disturbance-rejecting consensus bound; connectivity plays the PL role."""
    return robust_bound(lambda2, sigma, rho, q, eps, dbar)
