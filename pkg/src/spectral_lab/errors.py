"""Exception types shared across modules."""


class NumericFailure(ArithmeticError):
    """A computation overflowed or a series failed to converge.

    Parameters
    ----------
    operation : str
        Name of the operation that failed.
    reason : str
        Short human-readable cause.
    """

    def __init__(self, operation: str, reason: str):
        self.operation = operation
        self.reason = reason
        super().__init__(f"{operation}: {reason}")


class UnsupportedSpec(ValueError):
    """The requested operation has no oracle for this potential."""
