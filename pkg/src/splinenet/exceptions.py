class SplinenetError(Exception):
    """Base class for all package errors."""


class ShapeError(SplinenetError, ValueError):
    """Input or layer dimensions do not chain."""


class ParseError(SplinenetError, ValueError):
    """Malformed serialized model. ``position`` is a char offset or a JSON path."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at {position})"
        super().__init__(message)


class ModelError(SplinenetError, ValueError):
    """A model violates the contract of the operation (coefficient bound, degree, ...)."""


class ParameterError(SplinenetError, ValueError):
    """An argument is outside its admissible range."""


class TrainingError(SplinenetError, RuntimeError):
    """Every restart diverged."""
