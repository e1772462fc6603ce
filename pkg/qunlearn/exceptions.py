from django.core.exceptions import ImproperlyConfigured


class QunlearnError(Exception):
    """Base class for every error raised by the qunlearn apps."""


class DimensionError(QunlearnError, ValueError):
    """Tensor shapes do not conform."""


class InvalidInputError(QunlearnError, ValueError):
    """A value violates the contract of the operation receiving it."""


class ConfigError(QunlearnError, ImproperlyConfigured):
    """Unknown identifiers, bad experiment files, missing or corrupt datasets."""


class CapacityError(QunlearnError, ValueError):
    """A request exceeds what the simulator or dataset can provide."""


class FormatError(QunlearnError, ValueError):
    """Malformed binary or text input.

    ``offset`` is the byte position for binary payloads, ``line`` the 1-based
    line number for text payloads.
    """

    def __init__(self, message, offset=None, line=None):
        self.offset = offset
        self.line = line
        if offset is not None:
            message = f"{message} (at byte {offset})"
        elif line is not None:
            message = f"{message} (line {line})"
        super().__init__(message)


class WireIndexError(QunlearnError, IndexError):
    """Wire or parameter index outside the circuit."""


class ContractError(QunlearnError, RuntimeError):
    """An object was used out of order, e.g. a graph propagated twice."""


class TrainingDiverged(QunlearnError, ArithmeticError):
    """Loss became NaN or infinite."""

    def __init__(self, epoch, message=None):
        self.epoch = epoch
        super().__init__(message or f"training diverged at epoch {epoch}")
