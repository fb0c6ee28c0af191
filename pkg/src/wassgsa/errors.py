"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class GSAError(Exception):
    """Base class for all package errors."""


class DomainError(GSAError, ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class InsufficientSampleError(GSAError, ValueError):
    """Too few observations for the requested statistic."""


class UnsupportedFeatureError(GSAError, ValueError):
    """The requested combination of options is not available."""


class DegenerateOutputError(GSAError, ArithmeticError):
    """The variance term of an index estimate vanishes.

    The partial sums are kept so callers can still inspect them.
    """

    def __init__(self, message: str, numerator: float, denominator: float):
        super().__init__(message)
        self.numerator = numerator
        self.denominator = denominator


class CalibrationInfeasibleError(GSAError, ValueError):
    """The required approximation size exceeds the configured ceiling."""

    def __init__(self, message: str, required_n: int):
        super().__init__(message)
        self.required_n = required_n


class SimulatorError(GSAError, RuntimeError):
    """A stochastic simulator call failed; ``context`` records the input."""

    def __init__(self, message: str, context: dict | None = None):
        super().__init__(message)
        self.context = context or {}


class DesignFormatError(GSAError, ValueError):
    """A design or configuration file could not be parsed."""

    def __init__(self, message: str, row: int | None = None, column: str | int | None = None):
        loc = []
        if row is not None:
            loc.append(f"row {row}")
        if column is not None:
            loc.append(f"column {column}")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.row = row
        self.column = column
