"""
Exception hierarchy for the fracpoisson package.

Every error raised on purpose by the library derives from FracPoissonError so
callers (CLI, HTTP service) can map failures to exit codes and status codes.
"""

from typing import Any, Dict, Optional


class FracPoissonError(Exception):
    """Base class for all library errors."""


class DomainError(FracPoissonError):
    """A parameter lies outside the domain of the requested operation."""


class RangeError(FracPoissonError):
    """A linear-scale value does not fit in a double; use the log variant."""


class PreconditionError(FracPoissonError):
    """The theory behind an operation does not apply to these parameters."""


class ConfigurationError(FracPoissonError):
    """An experiment, hypothesis test or environment setting is inconsistent."""


class SamplingError(FracPoissonError):
    """The inverse-CDF walk ran past the certified truncation bound."""


class ConvergenceError(FracPoissonError):
    """A numerical solver failed to converge.

    Args:
        message: Human readable description
        diagnostics: Solver state at the point of failure
    """

    def __init__(self, message: str, diagnostics: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}

    def __str__(self) -> str:
        base = super().__str__()
        if not self.diagnostics:
            return base
        details = ", ".join(f"{k}={v}" for k, v in sorted(self.diagnostics.items()))
        return f"{base} ({details})"


# Errors that mean "the caller asked for something invalid" as opposed to
# "the numerics failed".
USER_ERRORS = (DomainError, PreconditionError, ConfigurationError)
NUMERICAL_ERRORS = (RangeError, SamplingError, ConvergenceError)
