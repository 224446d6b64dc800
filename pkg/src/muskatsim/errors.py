"""Exception hierarchy shared by the solver modules and the CLI."""

from __future__ import annotations


class MuskatError(Exception):
    """Base class for all errors raised by muskatsim."""


class InvalidInputError(MuskatError, ValueError):
    """Input violates a documented precondition (non-finite values, nonzero mean, ...)."""


class UnsupportedPowerError(InvalidInputError):
    pass


class DimensionError(InvalidInputError):
    pass


class GridMismatchError(InvalidInputError):
    pass


class InfeasibleDataError(MuskatError, ValueError):
    """Elliptic data admit no decaying solution (compatibility violated)."""

    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message)
        self.residual = residual


class TruncationError(MuskatError, ValueError):
    """Strip data do not decay enough at the depth truncation."""

    def __init__(self, message: str, value: float | None = None):
        super().__init__(message)
        self.value = value


class BlowUpError(MuskatError, RuntimeError):
    """Time integration produced non-finite or runaway values.

    ``t`` is the last time at which the state was still finite and
    ``trajectory`` holds everything recorded up to that point.
    """

    def __init__(self, message: str, t: float, trajectory=None):
        super().__init__(message)
        self.t = t
        self.trajectory = trajectory


class ConfigError(MuskatError, ValueError):
    def __init__(self, message: str, key: str | None = None, line: int | None = None):
        where = []
        if key is not None:
            where.append(f"key '{key}'")
        if line is not None:
            where.append(f"line {line}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)
        self.key = key
        self.line = line
