"""
Exception hierarchy for the zeta-deficiency toolkit.

Each error carries the process exit code the CLI reports for it.
"""
from typing import Optional


class DeficiencyError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class ValidationFailure(DeficiencyError, ValueError):
    """A precondition or type constraint was violated."""

    exit_code = 2


class ConfigurationError(ValidationFailure):
    """Invalid settings, config file or preset."""


class TableRangeError(ValidationFailure):
    """Requested index lies outside a table or spectrum."""


class CapacityError(ValidationFailure):
    """A configured cap (table length, Bernoulli index) was exceeded."""


class DivergentConfigurationError(ValidationFailure):
    """The requested series does not converge."""


class IOFailure(DeficiencyError):
    """An input or output path could not be read or written."""

    exit_code = 3


class SpectrumFormatError(DeficiencyError):
    """Malformed eigenvalue file."""

    exit_code = 4

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AnalysisError(DeficiencyError):
    """A convergence diagnostic could not be produced."""
