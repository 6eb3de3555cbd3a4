"""Exception types shared across the package."""


class RlhedgeError(Exception):
    """Base class for all package-specific errors."""


class ParameterError(RlhedgeError, ValueError):
    """A model/market parameter is outside its admissible domain."""


class NumericError(RlhedgeError, ArithmeticError):
    """A numerical routine failed to converge or produced non-finite values."""


class InsufficientDataError(RlhedgeError, ValueError):
    """Too few observations for the requested operation."""


class CalibrationFailedError(RlhedgeError):
    """No calibration restart produced a usable fit."""


class NoSolutionError(RlhedgeError, ValueError):
    """The requested inverse problem has no solution in the admissible band."""


class DataError(RlhedgeError, ValueError):
    """Malformed or inconsistent input data (files, rows, configs)."""


class TrainingFailedError(RlhedgeError):
    """Training aborted (too many skipped batches or non-finite updates)."""
