"""Exception hierarchy shared by the library and the CLI."""


class CurstatError(Exception):
    """Base class for all errors raised by curstat."""


class ConfigError(CurstatError, ValueError):
    """Invalid configuration: a dimension, budget, parameter or CLI field."""


class EvaluationError(CurstatError, ValueError):
    """A point was evaluated outside the support of a basis or estimator."""


class NumericalError(CurstatError, ArithmeticError):
    """A numerical routine failed its own consistency check."""


class InputFormatError(CurstatError):
    """Malformed input file; the message carries the offending line number when known."""
