"""Exception hierarchy shared across the package."""


class CodesumError(Exception):
    """Base class for all errors raised by this package."""


# corpus

class UnbalancedBraces(CodesumError):
    """A source file whose braces never balance; the file is skipped."""


class EmptyCorpus(CodesumError):
    """A vocabulary or index build received no examples."""


# tensorcore

class KernelTooLong(CodesumError):
    """A narrow convolution kernel is wider than its input."""


class DimensionMismatch(CodesumError):
    """Tensor extents disagree with the parameter layout."""


# model

class VariantDisabled(CodesumError):
    """A model variant was requested but its parameters are absent."""


# trainer

class NonFiniteGradient(CodesumError):
    """A gradient contained NaN or Inf; the example is skipped."""


class EmptyTrainingSet(CodesumError):
    """Training was asked to run with zero examples."""


# eval

class EmptyIndex(CodesumError):
    """The tf-idf baseline was queried before an index was built."""


# checkpoint

class CheckpointError(CodesumError):
    """Base class for checkpoint file problems."""


class BadMagic(CheckpointError):
    """The file does not start with the checkpoint magic bytes."""


class UnsupportedVersion(CheckpointError):
    """The checkpoint version is newer than this code understands."""


class CorruptManifest(CheckpointError):
    """The manifest JSON is missing, malformed, or inconsistent."""


class TruncatedPayload(CheckpointError):
    """The tensor payload is shorter than the manifest promises."""
