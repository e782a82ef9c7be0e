"""
Exception hierarchy for stain-learn
"""
from typing import Optional


class NslError(Exception):
    """Base class for every error raised by the pipeline"""

    exit_code = 2


class ValidationFailure(NslError):
    """Bad flags, bad configuration or a violated precondition"""

    exit_code = 1


class DataError(NslError):
    """Input files or datasets that cannot be used"""

    exit_code = 2


class NumericFailure(NslError):
    """Arithmetic that cannot proceed"""

    exit_code = 3


# Model mathematics
class SingularRow(NumericFailure):
    pass


class InvalidEpsilon(ValidationFailure):
    pass


class EmptyBatch(ValidationFailure):
    pass


class ShapeMismatch(NumericFailure):
    pass


# Training
class EmptyDataset(DataError):
    pass


class NonFiniteLoss(NumericFailure):
    pass


# Ingestion
class MissingColumn(DataError):
    pass


class DuplicateSpotId(DataError):
    pass


class MalformedRow(DataError):
    """A row that could not be parsed; carries its 1-based row number"""

    def __init__(self, message: str, row: Optional[int] = None, path: Optional[str] = None):
        self.row = row
        self.path = path
        where = ""
        if path is not None:
            where += f"{path}"
        if row is not None:
            where += f":{row}"
        super().__init__(f"{where}: {message}" if where else message)


class NoOverlap(DataError):
    pass


class RaggedRow(MalformedRow):
    pass


class NegativeExpression(DataError):
    pass


class DecodeError(DataError):
    pass


# Statistics
class ZeroVariance(NumericFailure):
    pass


class LengthMismatch(ValidationFailure):
    pass


class TooFew(ValidationFailure):
    pass


class SinglePatient(DataError):
    pass


class Empty(ValidationFailure):
    pass


class OutOfRange(ValidationFailure):
    pass


# Baseline
class TooFewRows(DataError):
    pass


class NonFinite(NumericFailure):
    pass


class ColumnMismatch(ValidationFailure):
    pass


class RankDeficient(UserWarning):
    """Least-squares design without full column rank; jitter was applied"""
