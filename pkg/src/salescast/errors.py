"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class SalescastError(Exception):
    exit_code = 1


class ConfigError(SalescastError, ValueError):
    """Bad argument, unknown column, malformed config."""

    exit_code = 2


class DataError(SalescastError, ValueError):
    """Input data violates a precondition (empty window, bad ordering, ...)."""

    exit_code = 3


class NumericalError(SalescastError, ArithmeticError):
    """Divergence, non-finite values, undefined statistics."""

    exit_code = 4
