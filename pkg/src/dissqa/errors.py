from __future__ import annotations


class DissqaError(Exception):
    """Base class for all package errors."""


class ConfigError(DissqaError, ValueError):
    """Invalid parameters or configuration (maps to CLI exit code 2)."""


class DomainError(DissqaError, ValueError):
    """Argument outside the domain of a function."""


class StateError(DissqaError, ValueError):
    """Bloch vector outside the unit ball."""


class NumericalError(DissqaError, ArithmeticError):
    """Numerical failure (maps to CLI exit code 3)."""


class IntegratorBlowup(NumericalError):
    def __init__(self, message: str, *, k: float | None = None, step: int | None = None,
                 time: float | None = None, norm: float | None = None):
        super().__init__(message)
        self.k = k
        self.step = step
        self.time = time
        self.norm = norm
