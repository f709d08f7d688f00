"""Exception types shared across the package.

File-not-found conditions use the builtin FileNotFoundError; everything
else subclasses AdapatchError so callers can catch the whole family.
"""


class AdapatchError(Exception):
    """Base class for all adapatch-specific errors."""


class UnsupportedFormatError(AdapatchError):
    """Input file is not one of the supported image formats."""


class CorruptDataError(AdapatchError):
    """Input file matched a supported format but failed to decode."""


class InvalidDimensionsError(AdapatchError, ValueError):
    """An image or resize target has a non-positive dimension."""


class EmptyRegionError(AdapatchError, ValueError):
    """A scorer was asked to evaluate a region with zero pixels."""


class IndivisibleRegionError(AdapatchError, ValueError):
    """Region side is not divisible by the requested downsampling factor."""


class IndivisibleImageError(AdapatchError, ValueError):
    """Image dimensions are not multiples of the base patch size."""


class CellOutOfBoundsError(AdapatchError, ValueError):
    """A patch cell extends outside the image it refers to."""


class DimensionMismatchError(AdapatchError, ValueError):
    """Tensor/image dimensions disagree with the configured shape."""


class EmptyBatchError(AdapatchError, ValueError):
    """A batch-level operation received no (or an empty) sequence."""


class ShapeMismatchError(AdapatchError, ValueError):
    """Output rows do not line up with the packed batch offsets."""


class IndivisibleWindowError(AdapatchError, ValueError):
    """Window side incompatible with the patch grid or image size."""


class CountMismatchError(AdapatchError, ValueError):
    """Token count does not match the assignment cell count."""


class EmptySequenceError(AdapatchError, ValueError):
    """Pooling was asked to reduce zero tokens."""


class NoImagesFoundError(AdapatchError):
    """Benchmark directory contains no decodable images."""


class ConfigError(AdapatchError, ValueError):
    """Run configuration failed validation; message names the field."""
