"""Exception hierarchy shared by the coverage engine and its command line."""

from __future__ import annotations


class CoverageError(Exception):
    """Base class for every error raised by :mod:`underlay_coverage`."""


class ConfigError(CoverageError):
    """Raised when a configuration cannot be turned into valid parameters."""


class MissingKey(ConfigError):
    def __init__(self, name: str) -> None:
        self.name = name
        super().__init__(f"missing required key: {name}")


class InvalidValue(ConfigError):
    def __init__(self, name: str, reason: str) -> None:
        self.name = name
        self.reason = reason
        super().__init__(f"invalid value for {name}: {reason}")


class DomainError(CoverageError, ValueError):
    """An argument lies outside the support of a distribution or formula."""


class QuadratureFailure(CoverageError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, what: str, error: float, tolerance: float) -> None:
        self.what = what
        self.error = error
        self.tolerance = tolerance
        super().__init__(
            f"quadrature for {what} failed: error estimate {error:.3e} > tolerance {tolerance:.3e}"
        )


class PrecisionLoss(CoverageError):
    """Floating point cancellation made a probability untrustworthy."""
