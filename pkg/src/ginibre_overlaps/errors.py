"""Exception types raised across the package."""

from __future__ import annotations


class OverlapError(Exception):
    """Base class for all package errors."""


class NonConvergence(OverlapError):
    """Dense eigensolver failed or its residual exceeded the tolerance."""


class DegenerateSpectrum(OverlapError):
    """Two eigenvalues are closer than the gap floor."""


class GapTooSmall(OverlapError):
    """An eigenvalue difference used as a divisor is below the floor."""


class DeltaDegenerate(OverlapError):
    """The rescaled pair separation is too small for the closed forms."""


class ArgumentTooLarge(OverlapError, OverflowError):
    """Result of a special function is not representable as a float."""


class EmptyWindow(OverlapError):
    """No samples fell inside a conditioning window."""


class InsufficientSamples(OverlapError):
    """Too few samples for a meaningful goodness-of-fit test."""


class InsufficientSteps(OverlapError):
    """Too few time steps for a quadratic-variation estimate."""


class DecompositionFailed(OverlapError):
    """Eigendecomposition failed at some step of a matrix flow."""


class CollisionDetected(OverlapError):
    """A conjugate pair came too close to the real axis."""


class ToleranceNotReached(OverlapError):
    """Adaptive quadrature did not reach the requested tolerance."""


class ConfigInvalid(OverlapError):
    """A run configuration is malformed or out of range."""


class BackendFailure(OverlapError):
    """A numerical backend failed during a run."""
