"""Exception hierarchy; each class maps to a distinct CLI exit code."""

from __future__ import annotations


class NucinvError(Exception):
    exit_code = 1


class ValidationError(NucinvError, ValueError):
    """Invalid input parameters or configuration."""

    exit_code = 2


class ConvergenceError(NucinvError, RuntimeError):
    """Integrator step underflow, unterminated decay tail or failed fit."""

    exit_code = 3


class InvariantViolation(NucinvError, RuntimeError):
    """Density matrix lost trace, Hermiticity or positivity."""

    exit_code = 4


class OutOfScopeError(NucinvError, NotImplementedError):
    """Requested physics outside the modelled regime."""

    exit_code = 5


def exit_code_for(exc: BaseException) -> int:
    return getattr(exc, "exit_code", 1)
