"""Exceptions raised by ql-order."""


class QlOrderError(Exception):
    """Base class of all ql-order errors."""


class InvalidArgumentError(QlOrderError, ValueError):
    """An argument violates the precondition of an operation."""


class DegenerateComponentError(QlOrderError, ArithmeticError):
    """A component has an identically zero reference waveform (zero diagonal correlation)."""


class DegenerateNormalizationError(DegenerateComponentError):
    """The normalizing abridged error probability p_a(0) is zero."""


class ConfigError(QlOrderError):
    """The experiment configuration cannot be read or is invalid."""


class SampleFileError(ConfigError):
    """A sample file line cannot be parsed."""

    def __init__(self, path: str, line: int, message: str):
        super().__init__(f"{path}:{line}: {message}")
        self.path = path
        self.line = line
