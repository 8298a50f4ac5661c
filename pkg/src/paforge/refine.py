"""Superpixel-guided mask refinement.

A coarse binary mask is snapped to superpixel boundaries by keeping exactly
the regions that (a) overlap the mask by more than alpha and (b) occupy less
than beta of the frame.  The area gate suppresses runaway regions on frames
where the mask swallowed the background.

Two overlap definitions are supported:
  overlap_ratio (default): |p & M| / |p| for region p against mask M.
  strict_iou: |p & M| / |p | M|.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin

from ._validation import check_same_shape
from .rasters import BinaryMask

OVERLAP_MODES = ("overlap_ratio", "strict_iou")


@dataclass(frozen=True)
class RefineParams:
    """alpha: overlap gate (exclusive); beta: frame-area gate (exclusive)."""

    alpha: float = 0.5
    beta: float = 0.4
    overlap_mode: str = "overlap_ratio"

    def __post_init__(self):
        if not (0.0 <= float(self.alpha) <= 1.0):
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha}")
        if not (0.0 < float(self.beta) <= 1.0):
            raise ValueError(f"beta must lie in (0, 1], got {self.beta}")
        if self.overlap_mode not in OVERLAP_MODES:
            raise ValueError(
                f"overlap_mode must be one of {OVERLAP_MODES}, "
                f"got {self.overlap_mode!r}"
            )


@dataclass(frozen=True)
class RefineReport:
    """Per-region diagnostics for one refinement call.

    overlap / area_ratio are indexed by region label; selected_regions lists
    the kept labels in ascending order.
    """

    overlap: np.ndarray
    area_ratio: np.ndarray
    selected_regions: tuple

    def __post_init__(self):
        object.__setattr__(self, "overlap", np.asarray(self.overlap, dtype=np.float64))
        object.__setattr__(
            self, "area_ratio", np.asarray(self.area_ratio, dtype=np.float64)
        )
        object.__setattr__(self, "selected_regions", tuple(self.selected_regions))


def refine_mask(mask, superpixels, params=None):
    """Snap a mask to superpixel support.

    Args:
        mask: BinaryMask to refine.
        superpixels: SuperpixelMap over the same frame.
        params: RefineParams; defaults apply when omitted.

    Returns:
        (BinaryMask, RefineReport).  The output is the union of the selected
        regions; an input that overlaps nothing strongly enough comes back
        empty, never an error.
    """
    if params is None:
        params = RefineParams()
    check_same_shape(mask.bits, superpixels.labels, "mask", "superpixel map")
    n = superpixels.region_count
    labels = superpixels.labels
    region_area = np.bincount(labels.ravel(), minlength=n).astype(np.float64)
    inter = np.bincount(labels[mask.bits], minlength=n).astype(np.float64)
    if params.overlap_mode == "overlap_ratio":
        overlap = inter / region_area
    else:
        # Region area is never 0, so the union is never 0 either.
        union = region_area + float(np.count_nonzero(mask.bits)) - inter
        overlap = inter / union
    area_ratio = region_area / float(mask.bits.size)
    keep = (overlap > params.alpha) & (area_ratio < params.beta)
    refined = BinaryMask(keep[labels])
    report = RefineReport(
        overlap=overlap,
        area_ratio=area_ratio,
        selected_regions=tuple(int(i) for i in np.flatnonzero(keep)),
    )
    return refined, report


def refine_batch(masks, superpixel_maps, params=None):
    """refine_mask over aligned sequences; returns (masks, reports) lists."""
    masks = list(masks)
    maps = list(superpixel_maps)
    if len(masks) != len(maps):
        raise ValueError(
            f"got {len(masks)} masks but {len(maps)} superpixel maps"
        )
    refined = []
    reports = []
    for m, sp in zip(masks, maps):
        r, rep = refine_mask(m, sp, params)
        refined.append(r)
        reports.append(rep)
    return refined, reports


class MaskRefiner(BaseEstimator, TransformerMixin):
    """Stateless transformer over (mask, superpixel_map) pairs."""

    def __init__(self, alpha=0.5, beta=0.4, overlap_mode="overlap_ratio"):
        self.alpha = alpha
        self.beta = beta
        self.overlap_mode = overlap_mode

    def _params(self):
        return RefineParams(
            alpha=self.alpha, beta=self.beta, overlap_mode=self.overlap_mode
        )

    def fit(self, X=None, y=None):
        self._params()
        return self

    def transform(self, X):
        """X: iterable of (BinaryMask, SuperpixelMap); returns refined masks."""
        params = self._params()
        return [refine_mask(m, sp, params)[0] for m, sp in X]

    def refine(self, mask, superpixels):
        """Single-pair form returning (mask, report)."""
        return refine_mask(mask, superpixels, self._params())
