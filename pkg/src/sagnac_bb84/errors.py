"""Exception types shared across the package.

The CLI maps these onto exit codes: validation-type errors exit 1,
I/O errors exit 2, numeric failures exit 3.
"""


class SagnacBb84Error(Exception):
    """Base class for all package-specific errors."""


class ParameterError(SagnacBb84Error, ValueError):
    """A parameter or argument is outside its physical/numeric domain."""


class SequenceError(ParameterError):
    """A modulation sequence is malformed or misses a required state."""


class ConfigError(SagnacBb84Error, ValueError):
    """A configuration file or input file failed validation."""


class UndefinedSlotError(SagnacBb84Error, ValueError):
    """A per-slot quantity is undefined (no in-basis counts)."""


class DegenerateSeriesError(SagnacBb84Error, ValueError):
    """A time series is degenerate (zero mean vector, all-zero signal)."""


class FitFailureError(SagnacBb84Error, RuntimeError):
    """A least-squares fit did not converge; carries residual diagnostics."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class NoPositiveRateError(SagnacBb84Error, ArithmeticError):
    """The secure key rate is non-positive already at zero channel loss."""


class ResourceLimitError(SagnacBb84Error, RuntimeError):
    """A simulation would exceed the configured event-storage limit."""
