"""Exception hierarchy shared across the package."""

from __future__ import annotations


class NearGaussError(Exception):
    """Base class for all package errors."""


class InvalidSpecError(NearGaussError, ValueError):
    """A density specification or input violates its invariants."""


class RegimeError(NearGaussError):
    """The near-Gaussian (perturbative) regime is violated.

    Raised when a certified bound cannot be formed, e.g. the lower bound on
    the partition series is non-positive.
    """


class QuadratureError(NearGaussError):
    """Numerical integration failed to reach the requested tolerance."""


class SamplerError(NearGaussError):
    """Rejection sampling exhausted its rejection budget."""
