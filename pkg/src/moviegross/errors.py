"""Exception types shared across the package.

Everything derives from ValueError so callers that do not care about the
fine-grained categories can still catch the lot with one clause.
"""


class MovieGrossError(ValueError):
    """Base class for all package-specific errors."""


class SchemaError(MovieGrossError):
    """Input table header is missing, incomplete, or has duplicate columns."""


class ShapeError(MovieGrossError):
    """Array/matrix dimensions are inconsistent with the operation."""


class DomainError(MovieGrossError):
    """A value is outside the mathematical domain of the operation."""


class DegenerateInputError(MovieGrossError):
    """Input is formally valid but carries no usable information
    (constant column, zero marginal, etc.)."""


class CollinearityError(MovieGrossError):
    """Design matrix is rank deficient; names the offending columns."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = list(columns)


class EncodingError(MovieGrossError):
    """A categorical level was not seen when the design was built."""


class ConvergenceError(MovieGrossError):
    """An iterative routine exhausted its iteration budget."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations
