"""Exception hierarchy shared across the package."""


class CCLError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(CCLError, ValueError):
    """Array shapes or vector lengths do not agree."""


class PreconditionError(CCLError, ValueError):
    """An operation was called with inputs outside its domain."""


class ConfigError(CCLError, ValueError):
    """A configuration value is missing, malformed or inconsistent."""


class TrainingError(CCLError, ArithmeticError):
    """Numerical failure during training (non-finite loss or gradient)."""

    def __init__(self, message, epoch=None, batch=None):
        super().__init__(message)
        self.epoch = epoch
        self.batch = batch


class DataError(CCLError, ValueError):
    """Base class for dataset construction and parsing failures."""


class GenerationError(DataError):
    """A synthetic generator could not satisfy its constraints."""


class BadMagicError(DataError):
    pass


class TruncatedFileError(DataError):
    pass


class CountMismatchError(DataError):
    pass


class CSVFormatError(DataError):
    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row
