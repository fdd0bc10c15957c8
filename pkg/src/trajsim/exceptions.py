"""Exception hierarchy.

Every error raised on purpose by the package derives from ``TrajsimError``.
Argument problems additionally subclass ``ValueError`` so that callers using
plain ``except ValueError`` keep working.
"""


class TrajsimError(Exception):
    """Base class for all package errors."""


class ArgumentError(TrajsimError, ValueError):
    """An argument is outside its documented domain."""


class ParseError(TrajsimError, ValueError):
    """A trajectory file line could not be parsed."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = ""
        if path is not None and line is not None:
            where = f"{path}:{line}: "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)


class EmptyDatasetError(TrajsimError, ValueError):
    """A dataset that must contain trajectories is empty."""


class DegenerateDataError(TrajsimError, ValueError):
    """Data has no spread along an axis that needs scaling."""


class AlreadyNormalizedError(TrajsimError, ValueError):
    """Normalization was requested twice."""


class FormatError(TrajsimError, ValueError):
    """A binary or JSON artifact does not match its on-disk format."""


class ConfigError(TrajsimError, ValueError):
    """Invalid model or run configuration."""


class ShapeError(TrajsimError, ValueError):
    """Array operands have incompatible shapes."""


class MaskError(TrajsimError, ValueError):
    """An attention mask hides every entry of a row."""


class LengthError(TrajsimError, ValueError):
    """A trajectory is longer than the model's positional table."""


class NumericError(TrajsimError, ArithmeticError):
    """A NaN or infinity appeared where finite values are required."""

    def __init__(self, message, step=None):
        self.step = step
        if step is not None:
            message = f"{message} (step {step})"
        super().__init__(message)
