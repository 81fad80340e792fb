"""Exception types shared across the package."""
from __future__ import annotations


class TrimersimError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(TrimersimError, ValueError):
    """Invalid or incomplete parameter/schedule configuration."""


class InvalidStateError(TrimersimError, ValueError):
    """State vector violates its invariants (non-finite, wrong shape, ...)."""


class DomainError(TrimersimError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class DegenerateChannelError(DomainError):
    """Two-channel formula requested with a closed primary channel."""


class UnsupportedSizeError(TrimersimError, ValueError):
    """Matrix dimension outside the supported range."""


class DivergenceError(TrimersimError, RuntimeError):
    """Integration hit a non-finite state."""

    def __init__(self, message: str, last_good_time: float):
        super().__init__(message)
        self.last_good_time = last_good_time


class OptimizationFailedError(TrimersimError, RuntimeError):
    """No optimizer candidate produced a usable objective value."""


class ScenarioValidationError(TrimersimError, ValueError):
    """Scenario document failed schema or invariant validation."""


class UsageError(TrimersimError, ValueError):
    """Bad command-line usage (unknown scenario name, missing flag, ...)."""
