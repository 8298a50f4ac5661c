"""Input validation helpers shared across the package."""

import numpy as np

from .errors import DimensionMismatchError


def check_same_shape(a, b, a_name="first", b_name="second"):
    """Raise DimensionMismatchError naming both shapes when they differ."""
    if a.shape != b.shape:
        raise DimensionMismatchError(
            f"{a_name} has shape {tuple(a.shape)} but {b_name} has shape "
            f"{tuple(b.shape)}"
        )


def check_positive_int(value, name):
    if not isinstance(value, (int, np.integer)) or isinstance(value, bool):
        raise TypeError(f"{name} must be an int, got {type(value).__name__}")
    if value < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return int(value)


def check_finite(arr, name):
    if not np.all(np.isfinite(arr)):
        raise ValueError(f"{name} must contain only finite values")


def as_float_map(x):
    """Coerce a FloatMap or 2-D array-like into a FloatMap."""
    from .rasters import FloatMap

    if isinstance(x, FloatMap):
        return x
    return FloatMap(np.asarray(x, dtype=np.float64))


def as_rgb_image(x):
    """Coerce an RgbImage or (h, w, 3) uint8 array-like into an RgbImage."""
    from .rasters import RgbImage

    if isinstance(x, RgbImage):
        return x
    return RgbImage(np.asarray(x))


def as_binary_mask(x):
    """Coerce a BinaryMask or 2-D bool array-like into a BinaryMask."""
    from .rasters import BinaryMask

    if isinstance(x, BinaryMask):
        return x
    return BinaryMask(np.asarray(x))
