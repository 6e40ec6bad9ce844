"""Exception hierarchy.

Input problems derive from ``ParameterError`` (a ``ValueError``), failures of a
numerical procedure derive from ``NumericalError`` (an ``ArithmeticError``).
The CLI maps the two families onto distinct exit codes.
"""

from __future__ import annotations


class DeltaSmileError(Exception):
    """Root of every error raised by the package."""


class ParameterError(DeltaSmileError, ValueError):
    """An input violates a documented precondition."""


class NumericalError(DeltaSmileError, ArithmeticError):
    """A numerical procedure could not deliver a trustworthy value."""


class ConfigError(ParameterError):
    """A run configuration is malformed or inconsistent."""


class InvalidParameter(ParameterError):
    pass


class DegenerateModel(ParameterError):
    """nu = 0 where the stochastic-volatility path needs nu > 0."""


class InvalidPoint(ParameterError):
    pass


class InvalidArgument(ParameterError):
    pass


class InvalidGrid(ParameterError):
    pass


class UseHyperbolicForm(ParameterError):
    """delta = 1 passed to a formula that only holds for delta < 1."""


class OutOfImage(ParameterError):
    """A point outside the image of the isometry."""


class NotAMinimum(NumericalError):
    pass


class NumericalFailure(NumericalError):
    pass


class BoundaryHit(NumericalError):
    """A geodesic reached the y = 0 boundary; ``partial`` holds the path so far."""

    def __init__(self, message: str, partial=None):
        super().__init__(message)
        self.partial = partial


class NoIntersection(NumericalError):
    pass


class BranchAmbiguity(NumericalError):
    pass


class ConjugatePoint(NumericalError):
    pass


class SingularField(NumericalError):
    pass


class InvalidGeometry(NumericalError):
    pass


class NoImpliedVol(NumericalError):
    pass
