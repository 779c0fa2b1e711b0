"""Exception hierarchy shared by every module.

Callers that only care about "something in the library failed" catch
``HTRPOError``; the CLI maps subclasses onto exit codes.
"""

from __future__ import annotations


class HTRPOError(Exception):
    """Base class for all library errors."""


class ConfigurationError(HTRPOError):
    """Invalid configuration, CLI usage, or policy/env mismatch."""


class InputShapeError(HTRPOError, ValueError):
    """An array or tensor has the wrong shape for the receiving component."""


class NumericError(HTRPOError, ArithmeticError):
    """A non-finite value appeared where finite values are required."""

    def __init__(self, message: str, iteration: int | None = None) -> None:
        if iteration is not None:
            message = f"{message} (iteration {iteration})"
        super().__init__(message)
        self.iteration = iteration


class DegenerateDirectionError(HTRPOError, ValueError):
    """A Hessian-vector product was requested along the zero vector."""


class ActionRangeError(HTRPOError, ValueError):
    """A discrete action lies outside the environment's action range."""


class NoGoalsError(HTRPOError):
    """Goal selection was asked to pick from an empty achieved-goal set."""


class EmptyBatchError(HTRPOError, ValueError):
    """An estimator received no samples."""


class DistributionFamilyError(HTRPOError, TypeError):
    """Two distributions from different families were compared."""


class CurvatureError(HTRPOError):
    """The constraint curvature along the search direction is not positive."""


class CheckpointIncompatibleError(HTRPOError):
    """A checkpoint's layout does not match the network it is loaded into."""
