"""Exception hierarchy.

Three families map onto CLI exit codes: usage/configuration problems (1),
data problems (2) and numeric failures (3).
"""


class TremorSketchError(Exception):
    exit_code = 1


class UsageError(TremorSketchError):
    exit_code = 1


class DataError(TremorSketchError):
    exit_code = 2


class NumericError(TremorSketchError):
    exit_code = 3


# tensor / layer math
class ShapeMismatch(NumericError, ValueError):
    pass


class AxisOutOfRange(NumericError, IndexError):
    pass


class NotScalar(NumericError, ValueError):
    pass


class DetachedGraph(NumericError, RuntimeError):
    pass


class NonIntegralOutputSize(ShapeMismatch):
    pass


class NonFiniteInput(NumericError, ValueError):
    pass


class NonFiniteGradient(NumericError, ValueError):
    pass


class UnnormalizedWeights(NumericError, ValueError):
    pass


class NotDistribution(NumericError, ValueError):
    pass


class DivergedLoss(NumericError, RuntimeError):
    pass


class InvalidRate(UsageError, ValueError):
    pass


class InvalidConfig(UsageError, ValueError):
    pass


class InvalidParams(UsageError, ValueError):
    pass


class SingularTransform(NumericError, ValueError):
    pass


# images
class MalformedFile(DataError, ValueError):
    pass


class UnsupportedFormat(DataError, ValueError):
    pass


class EmptyImage(DataError, ValueError):
    pass


class ZeroDimension(UsageError, ValueError):
    pass


# datasets
class EmptyDataset(DataError, ValueError):
    pass


class MissingDirectory(DataError, FileNotFoundError):
    pass


class EmptyClass(DataError, ValueError):
    pass


class UnreadableImage(DataError, ValueError):
    pass


class AugmentationLeak(DataError, RuntimeError):
    """Raised when anything other than training data reaches augmentation."""


class MissingPairing(DataError, ValueError):
    pass


# checkpoints
class CheckpointError(DataError):
    pass


class IoFailure(CheckpointError, OSError):
    pass


class CorruptCheckpoint(CheckpointError, ValueError):
    pass


class ArchitectureMismatch(CheckpointError, ValueError):
    pass


# metrics
class LengthMismatch(DataError, ValueError):
    pass


class LabelOutOfRange(DataError, ValueError):
    pass


class EmptyMatrix(DataError, ValueError):
    pass


class EmptyVote(DataError, ValueError):
    pass


# configuration files
class ParseError(UsageError, ValueError):
    def __init__(self, message, line=None):
        self.line = line
        super().__init__(f"line {line}: {message}" if line is not None else message)


class UnknownKey(ParseError):
    pass


class InvalidValue(ParseError):
    pass
