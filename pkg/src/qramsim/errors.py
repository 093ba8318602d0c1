"""Exception types shared across the package."""


class QramSimError(Exception):
    """Base class for package errors."""


class SizeCapError(QramSimError):
    """A register or joint system exceeds the configured qubit cap."""


class DimensionMismatchError(QramSimError, ValueError):
    """Operands have incompatible sizes."""


class InvariantViolation(QramSimError):
    """A numerical invariant (hermiticity, trace, positivity, ...) failed."""


class BudgetExceededError(QramSimError):
    """A copy or iteration budget was exhausted."""


class PreconditionError(QramSimError, ValueError):
    """A documented precondition of an operation does not hold."""
