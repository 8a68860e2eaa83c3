"""Exception hierarchy shared by every pulsepair module."""


class PulsePairError(Exception):
    """Base class for all pulsepair errors."""


class ConfigError(PulsePairError):
    """The run configuration is invalid or references something unknown."""


class DomainError(PulsePairError, ValueError):
    """A numeric input lies outside the domain of the function."""


class ChannelIndexError(DomainError, IndexError):
    """A spectral channel index is out of range."""


class DataError(PulsePairError):
    """Input data cannot be used."""


class FormatError(DataError):
    """A PPF1 stream is malformed."""


class BadMagicError(FormatError):
    pass


class VersionMismatchError(FormatError):
    pass


class TruncatedFrameError(FormatError):
    def __init__(self, frame_position: int, expected: int, got: int):
        where = "header" if frame_position < 0 else f"frame #{frame_position}"
        super().__init__(f"truncated {where}: expected {expected} bytes, got {got}")
        self.frame_position = frame_position


class FrameLengthError(FormatError):
    def __init__(self, frame_index: int, expected: int, got: int):
        super().__init__(f"frame {frame_index} has {got} channels, header says {expected}")
        self.frame_index = frame_index


class InsufficientDataError(DataError):
    """Fewer frames than an estimator needs."""


class InjectionExtentError(DataError):
    """An injected pulse would land outside the observation."""


class StageError(PulsePairError):
    """A pipeline stage failed; wraps the original cause."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
