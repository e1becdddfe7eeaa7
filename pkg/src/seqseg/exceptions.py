"""Error types raised across the toolkit.

Every error derives from :class:`SegmentationError` so callers (the CLI in
particular) can catch one base class and report a diagnostic.
"""


class SegmentationError(Exception):
    """Base class for all toolkit errors."""


# corpus
class EmptyLine(SegmentationError, ValueError):
    pass


class MalformedWord(SegmentationError, ValueError):
    pass


class MalformedMorpheme(SegmentationError, ValueError):
    pass


class SchemeMismatch(SegmentationError, ValueError):
    pass


class LengthMismatch(SegmentationError, ValueError):
    pass


class EmptyInput(SegmentationError, ValueError):
    pass


# features
class EmptyCorpus(SegmentationError, ValueError):
    pass


class IndexOutOfRange(SegmentationError, IndexError):
    pass


class IdOutOfRange(SegmentationError, IndexError):
    pass


# recurrent / crf
class ShapeMismatch(SegmentationError, ValueError):
    pass


class EmptyLattice(SegmentationError, ValueError):
    pass


class NonFiniteLoss(SegmentationError, FloatingPointError):
    """Loss became NaN or infinite.

    ``checkpoint`` carries the last good model when raised from training.
    """

    def __init__(self, message, checkpoint=None):
        super().__init__(message)
        self.checkpoint = checkpoint


class NonFiniteGradient(SegmentationError, FloatingPointError):
    pass


# training
class InvalidEpoch(SegmentationError, ValueError):
    pass


class DuplicateSeeds(SegmentationError, ValueError):
    pass


class VersionMismatch(SegmentationError):
    pass


class CorruptFile(SegmentationError):
    pass


class IoFailure(SegmentationError, OSError):
    pass


# metrics
class AlignmentError(SegmentationError, ValueError):
    pass


# cli
class UsageError(SegmentationError):
    pass
