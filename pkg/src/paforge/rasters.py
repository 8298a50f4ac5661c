"""Core raster value types and mask operations.

All types wrap a read-only numpy array in row-major layout and validate their
invariants at construction, so downstream code never re-checks shapes or
dtypes.  Instances compare by value.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_shape
from .errors import DimensionMismatchError


def _freeze(arr):
    out = np.ascontiguousarray(arr)
    out.setflags(write=False)
    return out


def _check_2d(arr, name):
    if arr.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {tuple(arr.shape)}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ValueError(f"{name} must be at least 1x1, got {tuple(arr.shape)}")


@dataclass(frozen=True, eq=False)
class GrayImage:
    """Single-channel 8-bit image, shape (height, width), dtype uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        _check_2d(arr, "GrayImage.pixels")
        if arr.dtype != np.uint8:
            raise ValueError(f"GrayImage requires uint8, got {arr.dtype}")
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, GrayImage) and np.array_equal(
            self.pixels, other.pixels
        )


@dataclass(frozen=True, eq=False)
class RgbImage:
    """Interleaved 8-bit color image, shape (height, width, 3), dtype uint8."""

    pixels: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.pixels)
        if arr.ndim != 3 or arr.shape[2] != 3:
            raise ValueError(
                f"RgbImage must have shape (h, w, 3), got {tuple(arr.shape)}"
            )
        if arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"RgbImage must be at least 1x1, got {tuple(arr.shape)}")
        if arr.dtype != np.uint8:
            raise ValueError(f"RgbImage requires uint8, got {arr.dtype}")
        object.__setattr__(self, "pixels", _freeze(arr))

    @property
    def height(self):
        return self.pixels.shape[0]

    @property
    def width(self):
        return self.pixels.shape[1]

    def __eq__(self, other):
        return isinstance(other, RgbImage) and np.array_equal(
            self.pixels, other.pixels
        )


@dataclass(frozen=True, eq=False)
class FloatMap:
    """Dense scalar field, shape (height, width), dtype float64, all finite."""

    values: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.values, dtype=np.float64)
        _check_2d(arr, "FloatMap.values")
        if not np.all(np.isfinite(arr)):
            raise ValueError("FloatMap values must all be finite")
        object.__setattr__(self, "values", _freeze(arr))

    @property
    def height(self):
        return self.values.shape[0]

    @property
    def width(self):
        return self.values.shape[1]

    def __eq__(self, other):
        return isinstance(other, FloatMap) and np.array_equal(
            self.values, other.values
        )


@dataclass(frozen=True, eq=False)
class BinaryMask:
    """Boolean mask, shape (height, width)."""

    bits: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.bits)
        _check_2d(arr, "BinaryMask.bits")
        if arr.dtype != np.bool_:
            if not np.isin(arr, (0, 1)).all():
                raise ValueError("BinaryMask bits must be boolean or 0/1 valued")
            arr = arr.astype(bool)
        object.__setattr__(self, "bits", _freeze(arr))

    @classmethod
    def zeros(cls, height, width):
        return cls(np.zeros((height, width), dtype=bool))

    @property
    def height(self):
        return self.bits.shape[0]

    @property
    def width(self):
        return self.bits.shape[1]

    def __eq__(self, other):
        return isinstance(other, BinaryMask) and np.array_equal(
            self.bits, other.bits
        )


@dataclass(frozen=True, eq=False)
class SuperpixelMap:
    """Per-pixel region labels in [0, region_count), every label occupied."""

    labels: np.ndarray
    region_count: int

    def __post_init__(self):
        arr = np.asarray(self.labels)
        _check_2d(arr, "SuperpixelMap.labels")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"SuperpixelMap labels must be integer, got {arr.dtype}")
        arr = arr.astype(np.int32, copy=False)
        n = int(self.region_count)
        if n < 1:
            raise ValueError(f"region_count must be >= 1, got {n}")
        counts = np.bincount(arr.ravel(), minlength=n)
        if arr.min() < 0 or arr.max() >= n:
            raise ValueError(
                f"labels must lie in [0, {n}), got range "
                f"[{int(arr.min())}, {int(arr.max())}]"
            )
        if (counts[:n] == 0).any():
            missing = int(np.flatnonzero(counts[:n] == 0)[0])
            raise ValueError(f"region index {missing} has no pixels")
        object.__setattr__(self, "labels", _freeze(arr))
        object.__setattr__(self, "region_count", n)

    @property
    def height(self):
        return self.labels.shape[0]

    @property
    def width(self):
        return self.labels.shape[1]

    def __eq__(self, other):
        return (
            isinstance(other, SuperpixelMap)
            and self.region_count == other.region_count
            and np.array_equal(self.labels, other.labels)
        )


@dataclass(frozen=True)
class BBox:
    """Axis-aligned integer box: top-left corner plus extent, half-open."""

    x: int
    y: int
    width: int
    height: int

    def __post_init__(self):
        for name in ("x", "y"):
            if getattr(self, name) < 0:
                raise ValueError(f"BBox.{name} must be >= 0, got {getattr(self, name)}")
        for name in ("width", "height"):
            if getattr(self, name) < 1:
                raise ValueError(f"BBox.{name} must be >= 1, got {getattr(self, name)}")

    @property
    def x_end(self):
        return self.x + self.width

    @property
    def y_end(self):
        return self.y + self.height

    def slices(self):
        """(row_slice, col_slice) covering the box."""
        return slice(self.y, self.y_end), slice(self.x, self.x_end)


def mask_area(mask):
    """Number of set pixels in a BinaryMask."""
    return int(np.count_nonzero(mask.bits))


def mask_union(a, b):
    """Pixelwise OR of two masks of identical shape."""
    check_same_shape(a.bits, b.bits, "first mask", "second mask")
    return BinaryMask(a.bits | b.bits)


def mask_intersection(a, b):
    """Pixelwise AND of two masks of identical shape."""
    check_same_shape(a.bits, b.bits, "first mask", "second mask")
    return BinaryMask(a.bits & b.bits)


def bbox_of_mask(mask):
    """Tight bounding box of the set pixels, or None for an empty mask."""
    rows = np.flatnonzero(mask.bits.any(axis=1))
    if rows.size == 0:
        return None
    cols = np.flatnonzero(mask.bits.any(axis=0))
    y0, y1 = int(rows[0]), int(rows[-1])
    x0, x1 = int(cols[0]), int(cols[-1])
    return BBox(x=x0, y=y0, width=x1 - x0 + 1, height=y1 - y0 + 1)


def mask_boundary(mask):
    """Set pixels with at least one 4-neighbor outside the mask.

    Pixels on the image edge count as boundary when set.
    """
    p = np.pad(mask.bits, 1, constant_values=False)
    inner = (
        p[1:-1, 1:-1]
        & p[:-2, 1:-1]
        & p[2:, 1:-1]
        & p[1:-1, :-2]
        & p[1:-1, 2:]
    )
    return BinaryMask(mask.bits & ~inner)


def crop_mask(mask, box):
    """Mask restricted to a box (box must lie inside the mask)."""
    if box.x_end > mask.width or box.y_end > mask.height:
        raise DimensionMismatchError(
            f"box {box} exceeds mask shape {(mask.height, mask.width)}"
        )
    ys, xs = box.slices()
    return BinaryMask(mask.bits[ys, xs])
