"""Exception types shared across the package.

The CLI maps these onto stable exit codes: validation/shape/state errors
exit 2, numeric failures exit 3, I/O problems exit 4.
"""


class HistographError(Exception):
    """Base class for all errors raised by this package."""


class ShapeError(HistographError):
    """Tensor or layer dimensions do not match the operation's contract."""


class ValidationError(HistographError):
    """Invalid input data, configuration, or call sequence."""


class TapeError(HistographError):
    """Misuse of the differentiation tape (e.g. a second backward pass)."""


class NumericError(HistographError):
    """A computation produced a non-finite value."""


class UnsupportedMethodError(ValidationError):
    """The requested explanation method does not apply to this model."""


class CheckpointError(HistographError):
    """Base class for checkpoint load failures."""


class CorruptCheckpointError(CheckpointError):
    """The checkpoint file is unreadable or structurally damaged."""


class CheckpointVersionError(CheckpointError):
    """The checkpoint format version is not supported by this build."""
