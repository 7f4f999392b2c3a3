"""Exception hierarchy.

Three families map onto CLI exit codes: usage/config problems (1),
data problems (2) and numerical failures (3).
"""


class AdSpeechError(Exception):
    exit_code = 2


class UsageError(AdSpeechError):
    exit_code = 1


class DataError(AdSpeechError, ValueError):
    exit_code = 2


class NumericalFailure(AdSpeechError, ArithmeticError):
    exit_code = 3


# audio_io
class UnsupportedFormat(DataError):
    pass


class CorruptHeader(DataError):
    pass


class EmptyAudio(DataError):
    pass


class SilentSignal(DataError):
    pass


class SegmentOutOfRange(DataError):
    pass


class MalformedBullet(DataError):
    pass


# lld
class ClipTooShort(DataError):
    pass


class UnstableLPC(DataError):
    pass


# nn_core
class InputTooShort(DataError):
    pass


class LengthTooShort(DataError):
    pass


class BatchTooSmall(DataError):
    pass


class DimensionMismatch(DataError):
    pass


class InvalidConfig(UsageError, ValueError):
    pass


# train / eval / smo
class SingleClassData(DataError):
    pass


class EmptyDataset(DataError):
    pass


class TooFewSubjects(DataError):
    pass


class NoUtterances(DataError):
    pass


class EmptySweep(UsageError, ValueError):
    pass


class EmptyInput(DataError):
    pass


class NoConvergence(NumericalFailure):
    pass


class InvalidSpec(UsageError, ValueError):
    pass
