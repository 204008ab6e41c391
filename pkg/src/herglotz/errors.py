"""Exception types shared across the package."""

from __future__ import annotations


class HerglotzError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HerglotzError, ArithmeticError):
    """Numeric evaluation left the real domain (log of a non-positive
    number, fractional power of a negative base, division by zero,
    overflow)."""


class UnboundCoordinate(HerglotzError, KeyError):
    """A coordinate required for evaluation was missing from the point."""

    def __init__(self, coordinate):
        super().__init__(coordinate)
        self.coordinate = coordinate

    def __str__(self):  # KeyError quotes its repr; show a plain message
        return f"no value bound for coordinate '{self.coordinate}'"


class ExprSyntaxError(HerglotzError, ValueError):
    """Malformed expression text.  Carries the character offset."""

    def __init__(self, message, position=None):
        self.position = position
        if position is not None:
            message = f"{message} (at offset {position})"
        super().__init__(message)


class UnknownVariable(ExprSyntaxError):
    """An identifier that is not a coordinate, parameter, or function
    valid in the current parsing context."""


class OrderOutOfRange(HerglotzError, ValueError):
    """A jet coordinate exceeds the order bound of the current context."""


class OrderOverflow(HerglotzError, ValueError):
    """Applying the total derivative would create jet coordinates beyond
    the phase space (order > 2k)."""


class ZDependence(HerglotzError, ValueError):
    """An operation defined only for z-independent input received an
    expression containing z."""


class ModelError(HerglotzError):
    """A model file or model definition is invalid."""


class SingularLagrangian(HerglotzError):
    """An operation requiring a regular Lagrangian was applied to a
    singular (or not provably regular) one."""


class NotInvertible(HerglotzError):
    """The Legendre map cannot be inverted (singular Lagrangian)."""


class InternalInconsistency(HerglotzError):
    """Two independent derivation routes disagreed.  Indicates a bug, a
    degenerate model, or numerically hostile input; never silenced."""


class ReebContractionError(InternalInconsistency):
    """The candidate Reeb field failed its defining contractions."""


class NonTermination(HerglotzError):
    """The constraint algorithm exceeded its level cap."""


class UnderdeterminedChain(HerglotzError):
    """A projection was requested from a chain that leaves evolution
    components undetermined (or inconsistent)."""


class StepFailure(HerglotzError, RuntimeError):
    """The numeric integrator could not complete a step."""


class VerificationFailure(HerglotzError):
    """A verification command found residuals above tolerance."""
