"""Exception hierarchy shared across the package."""


class IrpError(Exception):
    """Base class for all package errors."""


class ParseError(IrpError):
    """Raised when an input file cannot be parsed. Carries the 1-based line number."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class ValidationError(IrpError):
    """Raised when data violates a documented invariant (weights, dimensions, ranges)."""


class TruncatedPathError(IrpError):
    """Raised when final blocks are requested from a path stopped by max_iterations."""
