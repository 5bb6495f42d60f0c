class ContractViolation(ValueError):
    """Raised when an operation is called outside its documented domain."""


class NonFiniteError(FloatingPointError):
    """Raised when a computation produces NaN or infinity."""


class OutOfBoundsWarning(UserWarning):
    """Emitted when an objective is evaluated outside its box bounds."""
