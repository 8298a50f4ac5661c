"""Segmentation metrics and the region-integrity criterion.

iou / miou_multiclass are ordinary overlap metrics.  The remaining three form
the label-free quality signal used by the evolution loop:

    miou_pa: agreement between refined predictions and the current
        pseudo-annotations, micro-aggregated over the frame set by default.
    rii (region integrity index): agreement between raw predictions and their
        own superpixel refinements; high when predictions respect region
        structure.
    ric (region integrity criterion): miou_pa + alpha * rii, unnormalized.
"""

from dataclasses import dataclass

import numpy as np

from ._validation import check_same_shape
from .refine import refine_mask


@dataclass(frozen=True)
class ClassLabelMap:
    """Per-pixel class ids in [0, class_count); class 0 is background."""

    labels: np.ndarray
    class_count: int

    def __post_init__(self):
        arr = np.asarray(self.labels)
        if arr.ndim != 2:
            raise ValueError(f"labels must be 2-D, got shape {tuple(arr.shape)}")
        if not np.issubdtype(arr.dtype, np.integer):
            raise ValueError(f"labels must be integer, got {arr.dtype}")
        n = int(self.class_count)
        if n < 2:
            raise ValueError(f"class_count must be >= 2, got {n}")
        if arr.size and (arr.min() < 0 or arr.max() >= n):
            raise ValueError(
                f"labels must lie in [0, {n}), got range "
                f"[{int(arr.min())}, {int(arr.max())}]"
            )
        out = arr.astype(np.int32, copy=True)
        out.setflags(write=False)
        object.__setattr__(self, "labels", out)
        object.__setattr__(self, "class_count", n)


@dataclass(frozen=True)
class RicParams:
    """alpha weights the integrity term; alpha=0 degrades to miou_pa."""

    alpha: float = 0.5

    def __post_init__(self):
        if not (float(self.alpha) >= 0.0):
            raise ValueError(f"alpha must be >= 0, got {self.alpha}")


@dataclass(frozen=True)
class EvalScores:
    miou_pa: float
    rii: float
    ric: float


def iou(a, b):
    """Intersection over union of two BinaryMasks.

    Two empty masks agree perfectly: IoU = 1.0.
    """
    check_same_shape(a.bits, b.bits, "first mask", "second mask")
    inter = int(np.count_nonzero(a.bits & b.bits))
    union = int(np.count_nonzero(a.bits | b.bits))
    if union == 0:
        return 1.0
    return inter / union


def miou_multiclass(pred, truth):
    """Mean per-class IoU over two ClassLabelMaps.

    Background (class 0) and classes absent from BOTH maps are excluded from
    the mean.  If no class remains, returns 1.0 when the maps agree that
    nothing is present, which they do by construction in that case.
    """
    if pred.class_count != truth.class_count:
        raise ValueError(
            f"class_count mismatch: {pred.class_count} vs {truth.class_count}"
        )
    check_same_shape(pred.labels, truth.labels, "prediction", "truth")
    per_class = []
    for c in range(1, pred.class_count):
        p = pred.labels == c
        t = truth.labels == c
        union = int(np.count_nonzero(p | t))
        if union == 0:
            continue
        per_class.append(int(np.count_nonzero(p & t)) / union)
    if not per_class:
        return 1.0
    return float(np.mean(per_class))


def _paired(preds, pas):
    preds = list(preds)
    pas = list(pas)
    if len(preds) != len(pas):
        raise ValueError(f"got {len(preds)} predictions but {len(pas)} references")
    if not preds:
        raise ValueError("need at least one (prediction, reference) pair")
    for p, q in zip(preds, pas):
        check_same_shape(p.bits, q.bits, "prediction", "reference")
    return preds, pas


def _micro_iou(preds, refs):
    inter = 0
    union = 0
    for p, r in zip(preds, refs):
        inter += int(np.count_nonzero(p.bits & r.bits))
        union += int(np.count_nonzero(p.bits | r.bits))
    if union == 0:
        return 1.0
    return inter / union


def miou_pa(refined_preds, pas, macro=False):
    """Overlap between refined predictions and current pseudo-annotations.

    Micro aggregation (default) pools intersections and unions over the whole
    frame set; macro averages per-frame IoU instead.
    """
    preds, refs = _paired(refined_preds, pas)
    if macro:
        return float(np.mean([iou(p, r) for p, r in zip(preds, refs)]))
    return _micro_iou(preds, refs)


def rii(raw_preds, refined_preds):
    """Agreement between raw predictions and their superpixel refinements."""
    preds, refs = _paired(raw_preds, refined_preds)
    return _micro_iou(preds, refs)


def ric(miou_pa_value, rii_value, params=None):
    """Region integrity criterion: miou_pa + alpha * rii (not normalized)."""
    if params is None:
        params = RicParams()
    return float(miou_pa_value) + params.alpha * float(rii_value)


def score_predictions(raw_preds, pas, superpixel_maps, refine_params=None,
                      ric_params=None, macro=False):
    """Full evaluation pass: refine raw predictions, then score them.

    Args:
        raw_preds: model output masks, one per frame.
        pas: current pseudo-annotations, aligned with raw_preds.
        superpixel_maps: SuperpixelMap per frame (the Stage-1 maps).
        refine_params / ric_params: defaults apply when omitted.
        macro: aggregation flag passed through to miou_pa.

    Returns:
        EvalScores with miou_pa, rii, and their ric combination.
    """
    raw = list(raw_preds)
    pa_list = list(pas)
    maps = list(superpixel_maps)
    if not (len(raw) == len(pa_list) == len(maps)):
        raise ValueError(
            f"length mismatch: {len(raw)} predictions, {len(pa_list)} "
            f"pseudo-annotations, {len(maps)} superpixel maps"
        )
    refined = [refine_mask(p, sp, refine_params)[0] for p, sp in zip(raw, maps)]
    m = miou_pa(refined, pa_list, macro=macro)
    r = rii(raw, refined)
    return EvalScores(miou_pa=m, rii=r, ric=ric(m, r, ric_params))


def miou_pa_multiclass(refined_preds, pas):
    """Multiclass variant of miou_pa over ClassLabelMaps, micro-aggregated.

    Pools per-class intersections and unions over frames, then averages the
    per-class ratios, skipping background and globally absent classes.
    """
    preds = list(refined_preds)
    refs = list(pas)
    if len(preds) != len(refs):
        raise ValueError(f"got {len(preds)} predictions but {len(refs)} references")
    if not preds:
        raise ValueError("need at least one (prediction, reference) pair")
    n = preds[0].class_count
    for p, r in zip(preds, refs):
        if p.class_count != n or r.class_count != n:
            raise ValueError("all maps must share class_count")
        check_same_shape(p.labels, r.labels, "prediction", "reference")
    ratios = []
    for c in range(1, n):
        inter = 0
        union = 0
        for p, r in zip(preds, refs):
            pm = p.labels == c
            rm = r.labels == c
            inter += int(np.count_nonzero(pm & rm))
            union += int(np.count_nonzero(pm | rm))
        if union == 0:
            continue
        ratios.append(inter / union)
    if not ratios:
        return 1.0
    return float(np.mean(ratios))


def mask_to_labelmap(mask, class_id=1, class_count=2):
    """Lift a BinaryMask to a ClassLabelMap with one foreground class."""
    if not (1 <= class_id < class_count):
        raise ValueError(
            f"class_id must lie in [1, {class_count}), got {class_id}"
        )
    labels = np.where(mask.bits, class_id, 0).astype(np.int32)
    return ClassLabelMap(labels=labels, class_count=class_count)
