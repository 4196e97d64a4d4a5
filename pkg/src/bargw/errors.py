"""Exception hierarchy.

Two families matter to callers: :class:`DataError` (malformed input, contract
violations on data) and :class:`DegenerateError` (the data are valid but a
statistic cannot be formed).  The CLI maps them to exit codes 2 and 3.
"""


class BarGwError(Exception):
    """Base class for every error raised by the package."""


class DataError(BarGwError, ValueError):
    pass


class InvalidNodeError(DataError):
    pass


class ForestError(DataError):
    """Forest violates the root / hereditary / uniqueness invariants."""


class OutOfRangeError(DataError):
    pass


class LineageFormatError(DataError):
    def __init__(self, message: str, row: int | None = None):
        self.row = row
        if row is not None:
            message = f"row {row}: {message}"
        super().__init__(message)


class ConfigError(DataError):
    pass


class InvalidLawError(DataError):
    pass


class InvalidNoiseError(DataError):
    pass


class InstabilityError(DataError):
    pass


class SubcriticalError(DataError):
    pass


class DegenerateError(BarGwError, ArithmeticError):
    pass


class DegenerateEigenvectorError(DegenerateError):
    pass


class ForestExtinctError(DegenerateError):
    pass


class RankDeficientError(DegenerateError):
    def __init__(self, message: str, block: int | None = None):
        self.block = block
        super().__init__(message)


class InsufficientDataError(DegenerateError):
    pass


class DegenerateStatisticError(DegenerateError):
    pass


class NotPSDError(DegenerateError):
    pass
