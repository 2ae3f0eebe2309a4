"""Exception hierarchy shared across the package."""


class LocalStructError(Exception):
    """Base class for every error raised by localstruct."""


class InvalidOutputError(LocalStructError, ValueError):
    """An output is not a member of the output space it is used with."""


class DimensionError(LocalStructError, ValueError):
    """Vector or sequence sizes do not agree."""


class CapacityError(LocalStructError):
    """The output space is too large to enumerate."""


class BackendError(LocalStructError):
    """The requested inference backend cannot handle the feature map / loss pair."""


class ContractError(LocalStructError):
    """A precondition of an operation was violated by the caller."""


class NumericError(LocalStructError, ArithmeticError):
    """A computation produced non-finite values."""


class DataError(LocalStructError):
    """A dataset, model or config file could not be parsed or failed validation."""
