"""Exception types shared across the toolkit."""


class MaskBoostError(Exception):
    """Base class for all toolkit errors."""


class DimensionMismatch(MaskBoostError):
    """Two masks (or a mask and its declared shape) differ in width/height."""


class DecodeError(MaskBoostError):
    """Encoded mask bytes could not be decoded."""


class UnsupportedFormat(MaskBoostError):
    """Mask bytes are not one of the supported single-channel formats."""


class EmptyForeground(MaskBoostError):
    """No prompt can be derived from a mask with zero foreground pixels."""


class BackendUnavailable(MaskBoostError):
    """Segmenter backend unreachable after retrying."""


class ProtocolError(MaskBoostError):
    """Segmenter backend returned a malformed or non-success response."""


class MissingPrecomputed(MaskBoostError):
    """No stored mask exists for the requested episode id."""


class LengthMismatch(MaskBoostError):
    """Paired batch inputs have different lengths."""


class EmptyClass(MaskBoostError):
    """A fold class has no accumulated episodes (or zero union)."""


class EmptySet(MaskBoostError):
    """A metric was requested over an empty episode set."""


class ZeroUnion(MaskBoostError):
    """A pooled IoU was requested but the total union is zero."""


class IndivisibleClassCount(MaskBoostError):
    """Dataset class count is not divisible into four folds."""


class InsufficientSamples(MaskBoostError):
    """A fold class has too few entries for the requested shot count."""


class MissingMask(MaskBoostError):
    """A referenced mask file does not exist."""


class ConfigError(MaskBoostError):
    """Run configuration is invalid."""
