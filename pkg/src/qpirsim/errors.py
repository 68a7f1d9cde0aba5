"""Exception types shared across the package."""


class QpirError(Exception):
    """Base class for all package errors."""


class InvalidDimensionError(QpirError, ValueError):
    """A register or operator dimension is zero, negative, or non-integer."""


class DimensionMismatchError(QpirError, ValueError):
    """Operand dimensions do not line up."""


class ZeroMatrixError(QpirError, ValueError):
    """Vectorization of the zero matrix was requested."""


class StateValidationError(QpirError, ValueError):
    """A state or operator violates its defining invariant (norm, hermiticity, ...)."""


class ResourceGuardError(QpirError, ValueError):
    """The requested object would exceed the desk-scale amplitude budget."""


class OwnershipError(QpirError, ValueError):
    """A party touched or transferred a register it does not own."""


class ProtocolDefinitionError(QpirError, ValueError):
    """A protocol specification is structurally inconsistent."""
