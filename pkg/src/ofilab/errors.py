"""Exception taxonomy shared across the package.

Three failure families matter operationally and map to distinct CLI exit
codes: configuration problems (bad parameters, impossible requests), data
problems (malformed or inconsistent tick files), and numerical problems
(unstable schemes, non-convergent solvers, degenerate statistics).
"""

from __future__ import annotations


class OfilabError(Exception):
    """Base class for all package-specific errors."""


class ConfigError(OfilabError):
    """Invalid parameter or option combination supplied by the caller."""


class DataError(OfilabError):
    """Input data violates a contract (base class for tick-file errors)."""


class ParseError(DataError):
    """Tick file could not be parsed (bad header, arity, or cell value)."""


class ValidationError(DataError):
    """Parsed rows violate a field-level invariant (e.g. crossed book)."""


class OrderingError(DataError):
    """Rows violate ordering contracts (timestamps, volume, sessions)."""


class NumericalError(OfilabError):
    """Numerical failure (base class for scheme/solver/statistics issues)."""


class StatsError(NumericalError):
    """A statistic is undefined for the given sample (e.g. zero variance)."""


class ConvergenceError(NumericalError):
    """Iterative solver failed to converge; carries the last iterate."""

    def __init__(self, message: str, last_iterate=None):
        super().__init__(message)
        self.last_iterate = last_iterate
