"""Sign-preserving protocol maps used to reshape gradients.

Each :class:`Protocol` is one concrete map ``g`` with a positive scalar
``scale``; sums of terms are represented by :class:`ProtocolSum`.  All maps
send 0 to 0 (the unique selection consistent with equilibrium at a vanishing
gradient) and are odd.  For the discontinuous kinds, a positive chatter
regularization can be installed on the current thread via
:func:`sign_regularization`; it replaces ``sign(z)`` by ``z/(|z|+eps)`` and
norm denominators by their regularized counterparts.
"""

from __future__ import annotations

import contextlib
import contextvars
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError

Array = np.ndarray

KINDS = (
    "norm_subgradient",
    "rescaled",
    "power",
    "componentwise_power",
    "signum",
    "exponential_l2",
    "exponential_l1",
    "identity",
)

# Kinds whose output stays in span{y}; required where the radial structure
# matters (feasibility dynamics, simplified projected form).
RADIAL_KINDS = ("identity", "rescaled", "power", "exponential_l2")

# Kinds defined componentwise; required for distributed network protocols.
COMPONENTWISE_KINDS = ("signum", "componentwise_power", "exponential_l1", "identity")

_sign_reg: contextvars.ContextVar[float] = contextvars.ContextVar("sign_reg", default=0.0)


@contextlib.contextmanager
def sign_regularization(eps: float):
    """Evaluate signum-type discontinuities as ``z/(|z|+eps)`` within the block."""
    if eps < 0:
        raise ValidationError("regularization must be nonnegative")
    token = _sign_reg.set(float(eps))
    try:
        yield
    finally:
        _sign_reg.reset(token)


def current_regularization() -> float:
    return _sign_reg.get()


def _smooth_sign(y: Array, eps: float) -> Array:
    if eps > 0.0:
        return y / (np.abs(y) + eps)
    return np.sign(y)


def lp_norm(y: Array, r: float) -> float:
    """The r-norm for r >= 1, including r = inf."""
    y = np.asarray(y, dtype=float)
    if math.isinf(r):
        return float(np.max(np.abs(y))) if y.size else 0.0
    if r == 1.0:
        return float(np.sum(np.abs(y)))
    if r == 2.0:
        return float(np.linalg.norm(y))
    return float(np.sum(np.abs(y) ** r) ** (1.0 / r))


@dataclass(frozen=True)
class Protocol:
    """One concrete sign-preserving map, selected by ``kind``.

    Parameter ranges: ``r >= 1`` (or inf), ``p`` in [0, 1), ``q > 1``,
    ``alpha >= 0``.  ``scale`` multiplies the output.
    """

    kind: str
    scale: float = 1.0
    r: float | None = None
    p: float | None = None
    q: float | None = None
    alpha: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValidationError(f"unknown protocol kind {self.kind!r}")
        if self.scale <= 0:
            raise ValidationError("scale must be positive")
        if self.kind in ("norm_subgradient", "rescaled", "power"):
            if self.r is None or (not math.isinf(self.r) and self.r < 1.0):
                raise ValidationError("r must satisfy r >= 1 (inf allowed)")
            if self.kind != "norm_subgradient" and math.isinf(self.r):
                raise ValidationError("r = inf is supported only for norm_subgradient")
        if self.kind == "rescaled":
            if self.p is None or not 0.0 <= self.p < 1.0:
                raise ValidationError("rescaled needs p in [0, 1)")
        if self.kind == "power":
            if self.q is None or self.q <= 1.0:
                raise ValidationError("power needs q > 1")
        if self.kind == "componentwise_power":
            if self.alpha is None or self.alpha < 0.0:
                raise ValidationError("componentwise_power needs alpha >= 0")

    def __add__(self, other):
        return ProtocolSum.of(self) + other

    def terms_tuple(self) -> tuple["Protocol", ...]:
        return (self,)


@dataclass(frozen=True)
class ProtocolSum:
    """Sum of protocol terms; evaluation is the sum of term evaluations."""

    terms: tuple[Protocol, ...]

    def __post_init__(self):
        if len(self.terms) == 0:
            raise ValidationError("protocol sum needs at least one term")
        if not all(isinstance(t, Protocol) for t in self.terms):
            raise ValidationError("protocol sum terms must be Protocol instances")

    @staticmethod
    def of(*terms: Protocol) -> "ProtocolSum":
        return ProtocolSum(tuple(terms))

    def __add__(self, other):
        if isinstance(other, Protocol):
            return ProtocolSum(self.terms + (other,))
        if isinstance(other, ProtocolSum):
            return ProtocolSum(self.terms + other.terms)
        return NotImplemented

    def terms_tuple(self) -> tuple[Protocol, ...]:
        return self.terms


ProtocolLike = Protocol | ProtocolSum


def identity(scale: float = 1.0) -> Protocol:
    return Protocol("identity", scale)


def signum(scale: float = 1.0) -> Protocol:
    return Protocol("signum", scale)


def norm_subgradient(r: float, scale: float = 1.0) -> Protocol:
    return Protocol("norm_subgradient", scale, r=float(r))


def rescaled(p: float, r: float = 2.0, scale: float = 1.0) -> Protocol:
    return Protocol("rescaled", scale, r=float(r), p=float(p))


def power(q: float, r: float = 2.0, scale: float = 1.0) -> Protocol:
    return Protocol("power", scale, r=float(r), q=float(q))


def componentwise_power(alpha: float, scale: float = 1.0) -> Protocol:
    return Protocol("componentwise_power", scale, alpha=float(alpha))


def exponential_l2(scale: float = 1.0) -> Protocol:
    return Protocol("exponential_l2", scale)


def exponential_l1(scale: float = 1.0) -> Protocol:
    return Protocol("exponential_l1", scale)


def _eval_term(g: Protocol, y: Array) -> Array:
    eps = _sign_reg.get()
    kind = g.kind
    if kind == "identity":
        return g.scale * y

    if kind == "signum":
        return g.scale * _smooth_sign(y, eps)

    if kind == "componentwise_power":
        a = g.alpha
        if a == 0.0:
            return g.scale * _smooth_sign(y, eps)
        if a < 1.0 and eps > 0.0:
            # Componentwise analog of the smoothed sign: linear inside the
            # regularization layer, the exact power outside it.
            return g.scale * y / (np.abs(y) + eps) ** (1.0 - a)
        return g.scale * np.sign(y) * np.abs(y) ** a

    norm2 = float(np.linalg.norm(y))
    if norm2 == 0.0:
        return np.zeros_like(y)

    if kind == "exponential_l2":
        return g.scale * y * (math.exp(norm2) / (norm2 + eps))

    if kind == "exponential_l1":
        return g.scale * _smooth_sign(y, eps) * np.exp(np.abs(y))

    nr = lp_norm(y, g.r)
    if kind == "norm_subgradient":
        if g.r == 1.0:
            return g.scale * _smooth_sign(y, eps)
        if math.isinf(g.r):
            # Max-magnitude subgradient selection, ties broken by lowest index.
            i = int(np.argmax(np.abs(y)))
            out = np.zeros_like(y)
            out[i] = _smooth_sign(np.array([y[i]]), eps)[0]
            return g.scale * out
        out = np.sign(y) * np.abs(y) ** (g.r - 1.0) / nr ** (g.r - 1.0)
        if eps > 0.0:
            # Taper the unit-magnitude direction field linearly inside the
            # layer instead of flattening its near-origin growth order.
            out = out * (norm2 / (norm2 + eps))
        return g.scale * out

    if kind == "rescaled":
        return g.scale * y / (nr + eps) ** (1.0 - g.p)

    if kind == "power":
        return g.scale * y * nr ** (g.q - 1.0)

    raise ValidationError(f"unknown protocol kind {kind!r}")


def eval(g: ProtocolLike, y: Array) -> Array:
    """Evaluate the protocol (or sum) at ``y``; total, with g(0) = 0."""
    y = np.asarray(y, dtype=float)
    out = np.zeros_like(y)
    for term in g.terms_tuple():
        out = out + _eval_term(term, y)
    return out


@dataclass(frozen=True)
class ClassConstants:
    """Guaranteed lower-bound pair: ``g(y)'y >= coefficient*||y||^(1+exponent)``."""

    exponent: float
    coefficient: float


@dataclass(frozen=True)
class GlobalBoundMarker:
    """Marks exponential kinds whose settling bound is parameter-free.

    ``variant`` is ``"l2"`` or ``"l1"`` and ``alpha`` the protocol scale;
    together they feed the global exponential settling bound instead of the
    tabulated (exponent, coefficient) route.
    """

    variant: str
    alpha: float


def class_constants(g: Protocol, n: int) -> ClassConstants | GlobalBoundMarker:
    """Tabulated (exponent, coefficient) for one protocol term in dimension n.

    Exponential kinds return a :class:`GlobalBoundMarker` rather than a
    tabulated pair.  For the norm-based kinds with r > 2 the coefficients use
    the dimension factors that the inner-product inequalities actually
    support (n to a nonpositive power), so that every returned pair passes
    :func:`verify_class_membership`.
    """
    if n < 1:
        raise ValidationError("dimension must be positive")
    kind = g.kind
    if kind == "exponential_l2":
        return GlobalBoundMarker("l2", g.scale)
    if kind == "exponential_l1":
        return GlobalBoundMarker("l1", g.scale)
    if kind == "identity":
        return ClassConstants(1.0, g.scale)
    if kind == "signum":
        return ClassConstants(0.0, g.scale)
    if kind == "norm_subgradient":
        r = g.r
        if r <= 2.0:
            coeff = 1.0
        elif math.isinf(r):
            coeff = n ** (-0.5)
        else:
            coeff = n ** (1.0 / r - 0.5)
        return ClassConstants(0.0, g.scale * coeff)
    if kind == "rescaled":
        r, p = g.r, g.p
        coeff = n ** ((1.0 - p) / 2.0 - (1.0 - p) / r) if r <= 2.0 else 1.0
        return ClassConstants(p, g.scale * coeff)
    if kind == "power":
        r, q = g.r, g.q
        if r <= 2.0:
            coeff = 1.0
        elif math.isinf(r):
            coeff = n ** (-(q - 1.0) / 2.0)
        else:
            coeff = n ** ((q - 1.0) * (1.0 / r - 0.5))
        return ClassConstants(q, g.scale * coeff)
    if kind == "componentwise_power":
        a = g.alpha
        coeff = 1.0 if a <= 1.0 else n ** (1.0 - (a + 1.0) / 2.0)
        return ClassConstants(a, g.scale * coeff)
    raise ValidationError(f"no tabulated constants for kind {kind!r}")


@dataclass(frozen=True)
class MembershipReport:
    passed: bool
    worst_margin: float
    worst_y: Array
    samples: int


def verify_class_membership(
    g: ProtocolLike,
    p: float,
    sigma: float,
    n: int,
    samples: int = 1000,
    seed: int = 0,
) -> MembershipReport:
    """Numerically test ``g(y)'y >= sigma*||y||^(1+p)`` on random draws.

    Draws componentwise-uniform vectors on [-10, 10] and, for half of the
    samples, rescales them to log-spaced magnitudes down to 1e-8 so the
    behavior near the origin is exercised.  Reports the worst margin of
    ``g(y)'y - sigma*||y||^(1+p)*(1 - 1e-9)``.
    """
    if samples < 1:
        raise ValidationError("samples must be >= 1")
    rng = np.random.default_rng(seed)
    worst = math.inf
    worst_y = None
    passed = True
    for k in range(samples):
        y = rng.uniform(-10.0, 10.0, size=n)
        if not np.any(y):
            continue
        if k % 2 == 1:
            mag = 10.0 ** rng.uniform(-8.0, 1.0)
            y = y * (mag / np.linalg.norm(y))
        val = float(eval(g, y) @ y)
        margin = val - sigma * np.linalg.norm(y) ** (1.0 + p) * (1.0 - 1e-9)
        if margin < worst:
            worst = margin
            worst_y = y
        if margin < 0.0:
            passed = False
    return MembershipReport(passed, worst, worst_y, samples)


@dataclass(frozen=True)
class ExponentialBoundsCheck:
    """Lower-bound pairs for the exponential kinds; lhs must dominate rhs."""

    l2_pair: tuple[float, float]
    l1_pair: tuple[float, float]


def exponential_lower_bounds(y: Array, k: int) -> ExponentialBoundsCheck:
    """Evaluate both exponential inner-product inequalities at ``y``.

    Returns ``(y'g_e2(y), ||y||^(k+1)/k!)`` and, for the componentwise form,
    ``(sum_i |y_i| e^{|y_i|}, (||y||/sqrt(n)) e^{||y||/sqrt(n)})``.
    """
    if k < 1:
        raise ValidationError("k must be a positive integer")
    y = np.asarray(y, dtype=float)
    n = max(y.size, 1)
    norm2 = float(np.linalg.norm(y))
    lhs2 = norm2 * math.exp(norm2) if norm2 > 0 else 0.0
    rhs2 = norm2 ** (k + 1) / math.factorial(k)
    lhs1 = float(np.sum(np.abs(y) * np.exp(np.abs(y)))) if norm2 > 0 else 0.0
    s = norm2 / math.sqrt(n)
    rhs1 = s * math.exp(s) if norm2 > 0 else 0.0
    return ExponentialBoundsCheck((lhs2, rhs2), (lhs1, rhs1))


def is_radial(g: ProtocolLike) -> bool:
    """True when every term maps y into span{y}."""
    return all(t.kind in RADIAL_KINDS for t in g.terms_tuple())


def is_componentwise(g: ProtocolLike) -> bool:
    """True when every term is defined componentwise."""
    return all(
        t.kind in COMPONENTWISE_KINDS
        or (t.kind == "norm_subgradient" and t.r == 1.0)
        for t in g.terms_tuple()
    )


def from_config(spec) -> ProtocolLike:
    """Build a protocol from config data.

    A single mapping names one term by kind plus parameters, e.g.
    ``{"kind": "componentwise_power", "alpha": 1.5, "scale": 3}``; a list of
    mappings builds a sum.
    """
    if isinstance(spec, (list, tuple)):
        terms = []
        for entry in spec:
            term = from_config(entry)
            terms.extend(term.terms_tuple())
        return ProtocolSum(tuple(terms))
    if not isinstance(spec, dict):
        raise ValidationError("protocol config must be a mapping or list of mappings")
    allowed = {"kind", "scale", "r", "p", "q", "alpha"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValidationError(f"unknown protocol config keys: {sorted(unknown)}")
    kwargs = {k: v for k, v in spec.items() if k != "kind"}
    if "r" in kwargs and isinstance(kwargs["r"], str):
        kwargs["r"] = math.inf if kwargs["r"] in ("inf", "Infinity") else float(kwargs["r"])
    return Protocol(spec["kind"], **kwargs)


def to_config(g: ProtocolLike):
    """Inverse of :func:`from_config`, for reproducibility dumps."""
    def one(t: Protocol) -> dict:
        out = {"kind": t.kind, "scale": t.scale}
        for name in ("r", "p", "q", "alpha"):
            v = getattr(t, name)
            if v is not None:
                out[name] = "inf" if isinstance(v, float) and math.isinf(v) else v
        return out

    terms = g.terms_tuple()
    if len(terms) == 1:
        return one(terms[0])
    return [one(t) for t in terms]
