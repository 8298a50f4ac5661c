"""Exception hierarchy.

Every error raised by this package derives from PaForgeError so callers can
catch the whole family.  Most classes also inherit ValueError because the
conditions are bad-input conditions at heart.
"""


class PaForgeError(Exception):
    """Base class for all errors raised by paforge."""


class DimensionMismatchError(PaForgeError, ValueError):
    """Two rasters that must share a shape do not."""


class DegenerateInputError(PaForgeError, ValueError):
    """Input carries no usable signal (e.g. a constant attention map)."""


class EmptySelectionError(PaForgeError, RuntimeError):
    """Quality selection rejected every candidate frame."""

    def __init__(self, msg=None):
        if msg is None:
            msg = (
                "no candidate frame passed quality selection; "
                "consider relaxing disc_threshold / cls_threshold "
                "or improving the candidate pseudo-annotations"
            )
        super().__init__(msg)


class ScorerError(PaForgeError, RuntimeError):
    """A scorer callback failed or returned an out-of-contract value."""


class ContractViolationError(PaForgeError, RuntimeError):
    """A trainer or predictor callback broke its contract."""


class TensorFormatError(PaForgeError, ValueError):
    """A tensor file does not conform to the WSTF layout."""


class BadMagicError(TensorFormatError):
    """Tensor file does not start with the WSTF magic."""


class UnsupportedVersionError(TensorFormatError):
    """Tensor file declares a format version this reader does not speak."""


class RankRangeError(TensorFormatError):
    """Tensor file declares a rank outside 1..4."""


class TruncatedPayloadError(TensorFormatError):
    """Tensor file ends before the declared payload is complete."""


class TrailingDataError(TensorFormatError):
    """Tensor file carries bytes beyond the declared payload."""


class MaskFormatError(PaForgeError, ValueError):
    """A mask image is not single-channel strict {0, 255}."""


class ManifestError(PaForgeError, ValueError):
    """A dataset manifest line is malformed or references a missing file."""
