"""Exception hierarchy shared across the toolkit.

Two broad families matter for the CLI exit codes: DataError (malformed or
mismatched inputs, exit code 2) and NumericalError (computations that cannot
proceed or diverged, exit code 3). Plain OSError propagates for I/O failures.
"""


class EnsembleKitError(Exception):
    """Base class for all toolkit errors."""


class DataError(EnsembleKitError):
    """Malformed, inconsistent, or insufficient input data."""


class NumericalError(EnsembleKitError):
    """A numerical computation failed or diverged."""


class LengthError(DataError):
    """Byte payload has an impossible length for the declared format."""


class LabelError(DataError):
    """A class label is outside the valid range [0, 9]."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class InsufficientClassError(DataError):
    """A per-class selection asked for more samples than a class holds."""


class MagicError(DataError):
    """A binary file does not start with the expected magic bytes."""

    def __init__(self, message, offset=0):
        super().__init__(message)
        self.offset = offset


class VersionError(DataError):
    """A binary file declares an unsupported format version."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class TruncationError(DataError):
    """A binary file ended before its declared contents."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class NonFiniteError(DataError):
    """A stored value is NaN or infinite."""

    def __init__(self, message, offset=None):
        super().__init__(message)
        self.offset = offset


class AlignmentError(DataError):
    """Feature sets that must describe the same samples disagree."""


class DimensionError(DataError):
    """Matrix or vector dimensions are incompatible."""


class ConfigError(DataError):
    """A configuration violates its invariants."""


class ArgError(DataError):
    """An argument is incompatible with the data it applies to."""


class NormalizationError(DataError):
    """Probability rows do not sum to one within tolerance."""


class NonFiniteLossError(NumericalError):
    """Training loss became NaN or infinite (divergence)."""

    def __init__(self, message, epoch=None):
        super().__init__(message)
        self.epoch = epoch


class DegenerateDataError(NumericalError):
    """Data carries no variance to analyze."""


class RankWarning(UserWarning):
    """Requested more principal components than the numerical rank."""
