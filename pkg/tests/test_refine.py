"""Mask refinement against a per-region brute-force oracle."""

import numpy as np
import pytest

from paforge.errors import DimensionMismatchError
from paforge.rasters import BinaryMask, SuperpixelMap
from paforge.refine import MaskRefiner, RefineParams, refine_batch, refine_mask


def random_partition(rng, h, w, nregions):
    """Voronoi-ish partition guaranteed to occupy every label."""
    labels = np.zeros((h, w), dtype=np.int32)
    seeds = rng.choice(h * w, size=nregions, replace=False)
    sy, sx = np.divmod(seeds, w)
    ys, xs = np.mgrid[0:h, 0:w]
    d = (ys[..., None] - sy) ** 2 + (xs[..., None] - sx) ** 2
    labels = np.argmin(d, axis=2).astype(np.int32)
    # argmin can skip a seed label entirely; re-pin each seed pixel
    for i in range(nregions):
        labels[sy[i], sx[i]] = i
    used = np.unique(labels)
    lut = np.full(nregions, -1, dtype=np.int32)
    lut[used] = np.arange(used.size, dtype=np.int32)
    return SuperpixelMap(labels=lut[labels], region_count=used.size)


def oracle_refine(mask, sp, params):
    """Per-region loop with explicit boolean masks."""
    out = np.zeros_like(mask.bits)
    kept = []
    for rid in range(sp.region_count):
        region = sp.labels == rid
        inter = np.count_nonzero(region & mask.bits)
        if params.overlap_mode == "overlap_ratio":
            overlap = inter / np.count_nonzero(region)
        else:
            overlap = inter / np.count_nonzero(region | mask.bits)
        area_ratio = np.count_nonzero(region) / mask.bits.size
        if overlap > params.alpha and area_ratio < params.beta:
            out |= region
            kept.append(rid)
    return BinaryMask(out), tuple(kept)


def test_contained_region_kept_disjoint_region_dropped():
    labels = np.zeros((4, 8), dtype=np.int32)
    labels[:, 4:] = 1
    sp = SuperpixelMap(labels=labels, region_count=2)
    mask = BinaryMask(labels == 0)  # fully covers region 0, misses region 1
    refined, report = refine_mask(mask, sp, RefineParams(alpha=0.5, beta=0.6))
    assert report.selected_regions == (0,)
    assert refined == mask
    assert report.overlap[0] == 1.0 and report.overlap[1] == 0.0


def test_area_gate_drops_runaway_region():
    labels = np.zeros((8, 8), dtype=np.int32)
    labels[:2, :2] = 1
    sp = SuperpixelMap(labels=labels, region_count=2)
    mask = BinaryMask(np.ones((8, 8), dtype=bool))
    # region 0 covers 60/64 of the frame; beta=0.4 must reject it
    refined, report = refine_mask(mask, sp, RefineParams(alpha=0.5, beta=0.4))
    assert report.selected_regions == (1,)
    assert np.array_equal(refined.bits, labels == 1)


def test_matches_oracle_on_random_pairs():
    rng = np.random.default_rng(31)
    for trial in range(80):
        sp = random_partition(rng, 12, 12, int(rng.integers(2, 12)))
        mask = BinaryMask(rng.random((12, 12)) > rng.uniform(0.2, 0.8))
        for mode in ("overlap_ratio", "strict_iou"):
            params = RefineParams(
                alpha=float(rng.uniform(0, 1)),
                beta=float(rng.uniform(0.05, 1)),
                overlap_mode=mode,
            )
            got, report = refine_mask(mask, sp, params)
            want, kept = oracle_refine(mask, sp, params)
            assert got == want, (trial, mode)
            assert report.selected_regions == kept


def test_alpha_monotonicity():
    rng = np.random.default_rng(37)
    for _ in range(25):
        sp = random_partition(rng, 10, 10, 8)
        mask = BinaryMask(rng.random((10, 10)) > 0.5)
        prev = None
        for alpha in (0.0, 0.25, 0.5, 0.75, 1.0):
            _, report = refine_mask(mask, sp, RefineParams(alpha=alpha, beta=1.0))
            kept = set(report.selected_regions)
            if prev is not None:
                assert kept <= prev
            prev = kept


def test_beta_monotonicity():
    rng = np.random.default_rng(41)
    for _ in range(25):
        sp = random_partition(rng, 10, 10, 6)
        mask = BinaryMask(rng.random((10, 10)) > 0.4)
        prev = None
        for beta in (0.05, 0.2, 0.5, 1.0):
            _, report = refine_mask(mask, sp, RefineParams(alpha=0.3, beta=beta))
            kept = set(report.selected_regions)
            if prev is not None:
                assert prev <= kept
            prev = kept


def test_empty_result_is_not_an_error():
    sp = SuperpixelMap(labels=np.zeros((4, 4), dtype=np.int32), region_count=1)
    mask = BinaryMask.zeros(4, 4)
    refined, report = refine_mask(mask, sp)
    assert refined == BinaryMask.zeros(4, 4)
    assert report.selected_regions == ()


def test_param_validation():
    with pytest.raises(ValueError):
        RefineParams(alpha=1.5)
    with pytest.raises(ValueError):
        RefineParams(beta=0.0)
    with pytest.raises(ValueError):
        RefineParams(overlap_mode="jaccard")


def test_shape_mismatch():
    sp = SuperpixelMap(labels=np.zeros((4, 4), dtype=np.int32), region_count=1)
    with pytest.raises(DimensionMismatchError):
        refine_mask(BinaryMask.zeros(3, 4), sp)


def test_refine_batch_length_check():
    sp = SuperpixelMap(labels=np.zeros((2, 2), dtype=np.int32), region_count=1)
    masks = [BinaryMask.zeros(2, 2)]
    refined, reports = refine_batch(masks, [sp])
    assert len(refined) == len(reports) == 1
    with pytest.raises(ValueError):
        refine_batch(masks, [sp, sp])


def test_estimator_transform_matches_function():
    rng = np.random.default_rng(43)
    sp = random_partition(rng, 8, 8, 5)
    mask = BinaryMask(rng.random((8, 8)) > 0.5)
    est = MaskRefiner(alpha=0.3, beta=0.9, overlap_mode="strict_iou")
    out = est.fit().transform([(mask, sp)])
    want, _ = refine_mask(mask, sp, RefineParams(0.3, 0.9, "strict_iou"))
    assert out[0] == want
