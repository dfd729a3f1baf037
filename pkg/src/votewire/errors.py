"""Exception hierarchy.

Everything raised on bad data derives from :class:`DataError`, which the
command line maps to exit code 2.
"""


class DataError(ValueError):
    """Base class for input-data and domain errors."""


class ZeroBallots(DataError):
    pass


class ZeroRegistry(DataError):
    pass


class MalformedRecord(DataError):
    def __init__(self, line_no, reason):
        self.line_no = line_no
        self.reason = reason
        super().__init__(f"line {line_no}: {reason}")


class MissingColumn(DataError):
    def __init__(self, column):
        self.column = column
        super().__init__(f"missing required column {column!r}")


class NonNumericCell(DataError):
    def __init__(self, row, column, value):
        self.row = row
        self.column = column
        super().__init__(f"row {row}, column {column!r}: not an integer: {value!r}")


class UnknownCenter(DataError):
    def __init__(self, center_id):
        self.center_id = center_id
        super().__init__(f"center {center_id!r} not in registry")


class NoSessions(DataError):
    pass


class DegenerateSplit(DataError):
    """Two-means found a single cloud (or an empty cluster)."""


class EmptyInput(DataError):
    pass


class EmptySelection(DataError):
    pass


class UnknownMetric(DataError):
    pass


class TooFewPoints(DataError):
    pass


class DegenerateX(DataError):
    pass


class EmptySample(DataError):
    pass


class QOutOfRange(DataError):
    pass


class InsufficientData(DataError):
    pass


class DegenerateBinning(DataError):
    pass


class ZeroExpected(DataError):
    pass


class DomainError(DataError):
    pass


class POutOfRange(DomainError):
    pass


class InvalidConfig(DataError):
    def __init__(self, field, reason):
        self.field = field
        self.reason = reason
        super().__init__(f"{field}: {reason}")
