"""Exception types shared across the library."""


class InvalidInputError(ValueError):
    """Raised when an input matrix contains non-finite entries or bad values."""


class DimensionMismatchError(ValueError):
    """Raised when operand shapes are incompatible."""


class PreconditionError(ValueError):
    """Raised when a documented operation precondition does not hold."""


class DegenerateUpdateError(RuntimeError):
    """Raised when a solver update has no well-defined step (e.g. X P = 0)."""


class DivergedError(RuntimeError):
    """Raised when a solver produced non-finite or infeasible iterates.

    Carries the partial trace collected up to the failure.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class UnsupportedRegimeError(ValueError):
    """Raised when a probe or oracle is asked for a regime it refuses."""


class ParseError(ValueError):
    """Raised on malformed input files; carries the 1-based line number."""

    def __init__(self, message, line_number):
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class UndefinedMetricError(ValueError):
    """Raised when a metric is undefined for the given inputs (e.g. X = 0)."""
