"""Objective abstraction, gradient-domination certificates, and trajectory records.

An :class:`Objective` bundles a differentiable cost with optional curvature
and optimality certificates (optimal value, PL constant, projection onto the
minimizer set).  Everything here is immutable and the callables are expected
to be pure, so instances can be shared freely across threads.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Sequence

import numpy as np

from .errors import CertificateMissingError, UnboundedObjectiveError, ValidationError

Array = np.ndarray

# Finite-difference step sizes, balancing truncation against round-off in
# double precision.
GRAD_FD_STEP = 1e-6
HESS_FD_STEP = 1e-5

# Relative singular-value cutoff for rank decisions in factorizations.
SINGULAR_CUTOFF = 1e-10


@dataclass(frozen=True)
class Objective:
    """Differentiable cost with optional certificates.

    Attributes:
        dim: state dimension.
        f: pure callable, state -> scalar cost.
        grad: pure callable, state -> gradient vector.
        hessian: optional callable, state -> symmetric matrix.
        f_star: optimal value, when known.
        pl_mu: gradient-domination (PL) constant, when known.
        minimizer_projection: optional callable projecting a state onto the
            set of minimizers.
    """

    dim: int
    f: Callable[[Array], float]
    grad: Callable[[Array], Array]
    hessian: Callable[[Array], Array] | None = None
    f_star: float | None = None
    pl_mu: float | None = None
    minimizer_projection: Callable[[Array], Array] | None = None

    def __post_init__(self):
        if self.dim < 1:
            raise ValidationError("objective dimension must be a positive integer")
        if self.pl_mu is not None and self.pl_mu <= 0:
            raise ValidationError("pl_mu must be positive when supplied")

    def with_fields(self, **changes) -> "Objective":
        """Copy with some fields replaced."""
        return replace(self, **changes)


@dataclass(frozen=True)
class Trajectory:
    """Time-sampled states of one integration run.

    ``times`` is strictly increasing; ``states``, ``costs`` and
    ``grad_norms`` carry one entry per sample.  ``settling_time``, when
    present, is one of the sampled times.
    """

    times: Array
    states: Array
    costs: Array
    grad_norms: Array
    settling_time: float | None = None

    def __post_init__(self):
        times = np.asarray(self.times, dtype=float)
        states = np.asarray(self.states, dtype=float)
        costs = np.asarray(self.costs, dtype=float)
        grad_norms = np.asarray(self.grad_norms, dtype=float)
        object.__setattr__(self, "times", times)
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "costs", costs)
        object.__setattr__(self, "grad_norms", grad_norms)
        if times.ndim != 1 or len(times) == 0:
            raise ValidationError("trajectory needs at least one sample")
        if np.any(np.diff(times) <= 0):
            raise ValidationError("trajectory times must be strictly increasing")
        if not (len(times) == len(states) == len(costs) == len(grad_norms)):
            raise ValidationError("trajectory arrays must have identical length")
        if self.settling_time is not None and not np.any(
            np.isclose(times, self.settling_time, rtol=0.0, atol=0.0)
        ):
            raise ValidationError("settling_time must be one of the sampled times")

    def __len__(self) -> int:
        return len(self.times)

    @property
    def final_state(self) -> Array:
        return self.states[-1]

    @property
    def final_time(self) -> float:
        return float(self.times[-1])


@dataclass(frozen=True)
class SolveReport:
    """Outcome of one solve: trajectory plus headline scalars."""

    trajectory: Trajectory
    final_gradient_norm: float
    measured_settling: float | None = None
    theoretical_bound: float | None = None
    regret: float | None = None

    def __post_init__(self):
        if (
            self.measured_settling is not None
            and self.measured_settling > self.trajectory.final_time + 1e-15
        ):
            raise ValidationError("measured settling exceeds the trajectory horizon")


def pl_residual(obj: Objective, x: Array) -> float:
    """Slack of the gradient-domination inequality at ``x``.

    Returns ``0.5*||grad f(x)||^2 - mu*(f(x) - f_star)``; nonnegative
    everywhere when the certificate (``pl_mu``, ``f_star``) is valid.
    """
    if obj.pl_mu is None or obj.f_star is None:
        raise CertificateMissingError("pl_residual needs both pl_mu and f_star")
    x = np.asarray(x, dtype=float)
    g = np.asarray(obj.grad(x), dtype=float)
    return 0.5 * float(g @ g) - obj.pl_mu * (float(obj.f(x)) - obj.f_star)


def quadratic_objective(Q: Array, c: Array | None = None) -> Objective:
    """Objective for ``0.5*x'Qx + c'x`` with certificates filled in.

    ``Q`` must be symmetric positive semidefinite and ``c`` must lie in its
    range (otherwise the cost is unbounded below).  The PL constant is the
    smallest nonzero eigenvalue of ``Q``; flat directions do not invalidate
    gradient domination.  The minimizer projection is the orthogonal
    projector onto the affine solution set of ``Qx = -c``, computed once here
    via an eigendecomposition with relative cutoff ``SINGULAR_CUTOFF``.
    """
    Q = np.asarray(Q, dtype=float)
    if Q.ndim != 2 or Q.shape[0] != Q.shape[1]:
        raise ValidationError("Q must be a square matrix")
    n = Q.shape[0]
    scale = np.linalg.norm(Q)
    if scale == 0.0:
        raise ValidationError("Q must be nonzero")
    if np.linalg.norm(Q - Q.T) > 1e-10 * scale:
        raise ValidationError("Q must be symmetric")
    Q = 0.5 * (Q + Q.T)
    c = np.zeros(n) if c is None else np.asarray(c, dtype=float)
    if c.shape != (n,):
        raise ValidationError("c has the wrong shape")

    w, V = np.linalg.eigh(Q)
    cutoff = SINGULAR_CUTOFF * w[-1]
    if w[0] < -cutoff:
        raise ValidationError("Q must be positive semidefinite")
    nonzero = w > cutoff
    if not np.any(nonzero):
        raise ValidationError("Q is numerically zero")
    mu = float(w[nonzero][0])

    # Particular solution of Qx = -c through the pseudoinverse; a residual
    # means c has a component outside range(Q), i.e. no finite minimum.
    coeffs = V.T @ (-c)
    if np.linalg.norm(coeffs[~nonzero]) > 1e-8 * max(1.0, np.linalg.norm(c)):
        raise UnboundedObjectiveError("c is not in the range of Q")
    x_part = V[:, nonzero] @ (coeffs[nonzero] / w[nonzero])
    null_basis = V[:, ~nonzero]
    f_star = 0.5 * float(x_part @ Q @ x_part) + float(c @ x_part)

    def f(x: Array) -> float:
        x = np.asarray(x, dtype=float)
        return 0.5 * float(x @ Q @ x) + float(c @ x)

    def grad(x: Array) -> Array:
        return Q @ np.asarray(x, dtype=float) + c

    def hessian(x: Array) -> Array:
        return Q

    def project(x: Array) -> Array:
        dx = np.asarray(x, dtype=float) - x_part
        return x_part + null_basis @ (null_basis.T @ dx)

    return Objective(
        dim=n,
        f=f,
        grad=grad,
        hessian=hessian,
        f_star=f_star,
        pl_mu=mu,
        minimizer_projection=project,
    )


@dataclass(frozen=True)
class GrowthSample:
    """Measured growth ratios at one state; None marks a not-applicable entry."""

    distance: float
    cost_ratio: float | None
    gradient_ratio: float | None


@dataclass(frozen=True)
class GrowthReport:
    samples: tuple[GrowthSample, ...]

    @property
    def cost_ratios(self) -> list[float]:
        return [s.cost_ratio for s in self.samples if s.cost_ratio is not None]

    @property
    def gradient_ratios(self) -> list[float]:
        return [s.gradient_ratio for s in self.samples if s.gradient_ratio is not None]


def check_quadratic_growth(obj: Objective, samples: Sequence[Array]) -> GrowthReport:
    """Report measured quadratic-growth ratios at the given states.

    For each sample x, reports ``(f(x)-f*)/||x-[x]*||^2`` and
    ``||grad f(x)||/||x-[x]*||`` so the user can inspect which growth
    constant actually holds on the instance.  Samples coinciding with their
    projection yield not-applicable entries.
    """
    if obj.pl_mu is None or obj.f_star is None or obj.minimizer_projection is None:
        raise CertificateMissingError(
            "growth check needs pl_mu, f_star and minimizer_projection"
        )
    rows = []
    for x in samples:
        x = np.asarray(x, dtype=float)
        dist = float(np.linalg.norm(x - obj.minimizer_projection(x)))
        if dist <= 1e-12 * (1.0 + np.linalg.norm(x)):
            rows.append(GrowthSample(dist, None, None))
            continue
        gap = float(obj.f(x)) - obj.f_star
        gnorm = float(np.linalg.norm(obj.grad(x)))
        rows.append(GrowthSample(dist, gap / dist**2, gnorm / dist))
    return GrowthReport(tuple(rows))


def finite_difference_gradient(f: Callable[[Array], float], x: Array, step: float = GRAD_FD_STEP) -> Array:
    """Central-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        out[i] = (f(x + e) - f(x - e)) / (2.0 * step)
    return out


def finite_difference_jacobian(g: Callable[[Array], Array], x: Array, step: float = HESS_FD_STEP) -> Array:
    """Central-difference Jacobian of a vector function."""
    x = np.asarray(x, dtype=float)
    cols = []
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = step
        cols.append((np.asarray(g(x + e)) - np.asarray(g(x - e))) / (2.0 * step))
    return np.stack(cols, axis=1)
