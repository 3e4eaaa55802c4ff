"""Exception hierarchy shared by every stage of the pipeline."""


class VoxscreenError(Exception):
    """Base class for all errors raised by voxscreen."""


class ParseError(VoxscreenError, ValueError):
    pass


class UnsupportedFormat(VoxscreenError, ValueError):
    pass


class EmptyAudio(VoxscreenError, ValueError):
    pass


class InvalidArgument(VoxscreenError, ValueError):
    pass


class InsufficientSignal(VoxscreenError, ValueError):
    """Input is too short for the requested analysis."""


class NoVoicedSpeech(VoxscreenError, ValueError):
    pass


class InsufficientPeriods(VoxscreenError, ValueError):
    pass


class NoRecurrence(VoxscreenError, ValueError):
    pass


class SchemaError(VoxscreenError, ValueError):
    pass


class CannotOversample(VoxscreenError, ValueError):
    pass


class DegenerateLabels(VoxscreenError, ValueError):
    """Training labels contain a single class."""


class FoldDegenerate(DegenerateLabels):
    pass


class Undefined(VoxscreenError, ValueError):
    """A metric is undefined for the given input (e.g. AUC with one class)."""


class NoOp(VoxscreenError):
    pass


class ModelUnsupported(VoxscreenError, ValueError):
    pass


class TooLarge(VoxscreenError, ValueError):
    pass
