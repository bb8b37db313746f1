"""Exception hierarchy.

Errors fall in three families which the command line maps to exit codes:
:class:`ConfigError` (1), :class:`DataError` (2) and :class:`NumericError` (3).
"""


class ConsGraphError(Exception):
    pass


class ConfigError(ConsGraphError):
    pass


class DataError(ConsGraphError):
    pass


class NumericError(ConsGraphError):
    pass


class ParseError(DataError):
    def __init__(self, line_no, message="", path=None):
        self.line_no = line_no
        self.path = path
        where = f"{path}:" if path else "line "
        super().__init__(f"{where}{line_no}: {message}" if message else f"{where}{line_no}")


class UnknownItem(DataError, KeyError):
    def __init__(self, item_id):
        self.item_id = item_id
        super().__init__(f"unknown item {item_id!r}")

    def __str__(self):
        return self.args[0]


class DuplicateItem(DataError):
    def __init__(self, item_id):
        self.item_id = item_id
        super().__init__(f"duplicate item {item_id!r}")


class DimensionMismatch(DataError):
    def __init__(self, row, expected=None, got=None):
        self.row = row
        super().__init__(f"row {row}: expected dim {expected}, got {got}")


class EmptyDataset(DataError):
    pass


class HistoryTooShort(DataError):
    def __init__(self, user_id, length):
        self.user_id = user_id
        super().__init__(f"history of user {user_id!r} has {length} events, need at least 3")


class EmptyHistory(DataError):
    pass


class EmptyGraph(DataError):
    pass


class EmptyResults(DataError):
    pass


class LengthMismatch(DataError):
    pass


class ZeroVector(NumericError):
    pass


class NonFiniteLoss(NumericError):
    def __init__(self, step, value=None):
        self.step = step
        super().__init__(f"non-finite loss {value} at step {step}")


class GenerationFailed(NumericError):
    def __init__(self, attempts, reason=""):
        self.attempts = attempts
        super().__init__(f"generation failed after {attempts} attempts: {reason}")
