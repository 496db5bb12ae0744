"""Exception types shared across the package."""


class ClmnError(Exception):
    """Base class for all package errors."""


class ShapeError(ClmnError, ValueError):
    """Operand shapes do not conform to an operation's shape rule."""


class GradientError(ClmnError, RuntimeError):
    """Backward pass or optimizer invoked on an invalid graph state."""


class ConfigError(ClmnError, ValueError):
    """A configuration value violates its documented constraints."""


class ParseError(ClmnError, ValueError):
    """An input file could not be parsed.

    ``line`` is the 1-based line (or row) number where parsing failed, when known.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DataError(ClmnError, ValueError):
    """Loaded data violates a referential or semantic invariant."""


class TrainingError(ClmnError, RuntimeError):
    """Training aborted, e.g. on a non-finite loss term."""
