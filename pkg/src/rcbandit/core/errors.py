"""Exception types shared across rcbandit."""

from typing import Optional


class RcbError(Exception):
    """Base class for all rcbandit errors."""


class DimensionMismatchError(RcbError, ValueError):
    """Raised when a vector or matrix does not have the expected dimension.

    Attributes:
        expected: Dimension the operation required
        got: Dimension that was supplied
    """

    def __init__(self, expected: int, got: int, what: str = "covariate") -> None:
        self.expected = expected
        self.got = got
        self.message = f"{what} has dimension {got}, expected {expected}"
        super().__init__(self.message)


class CovarianceError(RcbError, ValueError):
    """Raised when a covariance matrix is not symmetric positive definite."""


class PhaseError(RcbError):
    """Raised when a cold-start step is called in the wrong phase.

    Attributes:
        expected: Phase the step requires
        actual: Phase the state is in
    """

    def __init__(self, expected: str, actual: str) -> None:
        self.expected = expected
        self.actual = actual
        self.message = f"step requires phase {expected}, state is in phase {actual}"
        super().__init__(self.message)


class SchemaError(RcbError):
    """Raised when an input file does not match the expected schema.

    Attributes:
        column: Offending column, if one can be named
    """

    def __init__(self, message: str, column: Optional[str] = None) -> None:
        self.column = column
        self.message = f"{message} (column: {column})" if column else message
        super().__init__(self.message)


class EmptyLogError(RcbError, ValueError):
    """Raised when a metric needs at least one logged step."""
