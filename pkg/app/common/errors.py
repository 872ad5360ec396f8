"""
Exception hierarchy shared by the numerical modules and the command line.

Each error carries the process exit code and a short machine-readable kind so the
CLI can report failures on a single stderr line.
"""


class SurrogateError(Exception):
    """Base class for all errors raised by the surrogate evaluation engine."""

    exit_code = 1
    kind = "error"


class ConfigurationError(SurrogateError, ValueError):
    """Invalid model, generator or command configuration."""

    exit_code = 2
    kind = "configuration"


class DataError(SurrogateError, ValueError):
    """Input data violates the panel contract."""

    exit_code = 3
    kind = "data"


class NumericalError(SurrogateError, ArithmeticError):
    """A numerical step failed (singular matrix, degenerate spread)."""

    exit_code = 4
    kind = "numerical"


class DegenerateVarianceError(NumericalError):
    """Bootstrap spread is exactly zero where a positive value is required."""
