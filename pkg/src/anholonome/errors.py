"""Exception hierarchy shared by every module of the package."""

from __future__ import annotations


class AnholonomeError(Exception):
    """Base class for all library errors."""


class DimensionError(AnholonomeError, ValueError):
    """Array lengths do not match the declared chart or fibre dimension."""


class EvaluationError(AnholonomeError, ArithmeticError):
    """An evaluator hit a pole or produced a non-finite intermediate."""


class SingularFrameError(AnholonomeError):
    """The frame matrix is (numerically) singular at the evaluated point."""


class RegularityError(AnholonomeError):
    """A mass matrix or saddle system is singular: the Lagrangian is not regular."""


class InconsistencyError(AnholonomeError):
    """Supplied geometric data (frame split, coefficients) is not self-consistent."""


class ConvergenceError(AnholonomeError):
    """An iterative solve did not reach its tolerance."""


class ModelError(AnholonomeError, ValueError):
    """A model is rejected at construction time."""


class DynamicsError(AnholonomeError):
    """Integration failed mid-trajectory."""

    def __init__(self, message: str, time: float):
        super().__init__(f"{message} (at t={time:.17g})")
        self.time = time
