"""Exception types shared across the toolkit."""

from __future__ import annotations


class FxtError(Exception):
    """Base class for all toolkit errors."""


class ValidationError(FxtError, ValueError):
    """An argument violates a construction-time contract."""


class CertificateMissingError(FxtError):
    """An operation needs an optimality certificate the objective lacks."""


class UnboundedObjectiveError(FxtError):
    """The requested objective has no finite minimum."""


class DivergenceError(FxtError):
    """Integration produced a non-finite state."""

    def __init__(self, time: float, message: str | None = None):
        self.time = float(time)
        super().__init__(message or f"state became non-finite at t={time:.6g}")


class SingularHessianError(FxtError):
    """Hessian solve failed: not positive definite within pivot tolerance."""

    def __init__(self, state, message: str | None = None):
        self.state = state
        super().__init__(message or "Hessian is singular or not positive definite")


class InvalidProjectionError(FxtError):
    """Projection matrix does not match the constraint null space."""


class InfeasibilityError(FxtError):
    """Linear system or constraint set admits no solution."""


class DistributednessError(FxtError):
    """Protocol cannot be evaluated with neighbor-only information."""


class ConfigurationError(FxtError):
    """Components were combined in an unsupported way."""
