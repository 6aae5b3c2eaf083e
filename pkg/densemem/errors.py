"""
Exceptions raised by densemem.
"""


class DenseMemError(Exception):
    """
    Base class for all densemem errors.
    """


class ShapeMismatchError(DenseMemError, ValueError):
    """
    Raised when arrays that must agree in shape do not.
    """


class StaleCacheError(DenseMemError, RuntimeError):
    """
    Raised when an overlap cache is used with a state it is not synchronized with.
    """


class IDXFormatError(DenseMemError, ValueError):
    """
    Raised when an IDX container cannot be parsed.
    """
    def __init__(self, message: str, offset: int):
        super().__init__(f"{message} (at byte offset {offset})")
        self.offset = offset


class CheckpointFormatError(DenseMemError, ValueError):
    """
    Raised when a checkpoint file is malformed.
    """


class TrainingDivergedError(DenseMemError, ArithmeticError):
    """
    Raised when the training objective becomes NaN or infinite.
    Carries a snapshot of the training state for diagnosis.
    """
    def __init__(self, message: str, snapshot: dict):
        super().__init__(message)
        self.snapshot = snapshot
