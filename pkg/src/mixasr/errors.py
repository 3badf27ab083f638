"""Exception hierarchy for mixasr.

Every error raised on a contract violation derives from MixasrError so the
CLI can catch them uniformly and emit a machine-readable error line.
"""


class MixasrError(Exception):
    """Base class for all mixasr errors."""


class InvalidAudio(MixasrError):
    """Audio samples are non-finite or otherwise unusable."""


class SampleRateMismatch(MixasrError):
    """Clip sample rate differs from the configured rate."""


class ShapeError(MixasrError):
    """Tensor shape inconsistent with the operation's contract."""


class ConfigError(MixasrError):
    """Configuration value violates an invariant."""


class ContextOverflow(MixasrError):
    """Decoder input longer than the decoder context window."""


class PartitionError(MixasrError):
    """A parameter could not be assigned to the frozen or trainable set."""


class SegmentError(MixasrError):
    """Encoder output too short to split off the enrollment prefix."""


class ArityError(MixasrError):
    """Mismatched number of branches, references or indices."""


class InvalidMatrix(MixasrError):
    """Loss matrix is non-square or contains non-finite entries."""


class ModeError(MixasrError):
    """Batch or example inconsistent with the requested task mode."""


class SpeakerCollision(MixasrError):
    """Two mixture sources share a speaker id."""


class EnrollmentTooShort(MixasrError):
    """Source clip shorter than the requested enrollment window."""


class CheckpointError(MixasrError):
    """Checkpoint missing, malformed, or inconsistent with the config."""


class ManifestError(MixasrError):
    """Manifest missing, malformed, or referencing absent files."""


class CapabilityError(MixasrError):
    """Checkpoint lacks a module required for the requested task."""


class UndefinedRate(MixasrError):
    """Error rate requested against an empty reference."""


class EmptyCorpus(MixasrError):
    """Evaluation requested on a manifest with no examples."""
