"""Cross-cutting sklearn contract checks for the estimator wrappers."""

import numpy as np
import pytest
from sklearn.base import clone

from paforge.rasters import BinaryMask, FloatMap, RgbImage
from paforge.refine import MaskRefiner, RefineParams, refine_mask
from paforge.slic import SlicParams, SlicSuperpixels, slic
from paforge.synthetic import StubTrainer, grid_superpixels
from paforge.thresholding import OtsuBinarizer, binarize, otsu_threshold
from paforge.evolution import PaEvolution

ESTIMATORS = [
    OtsuBinarizer(),
    SlicSuperpixels(n_segments=9, compactness=4.0, max_iters=3,
                    enforce_connectivity=False),
    MaskRefiner(alpha=0.25, beta=0.75, overlap_mode="strict_iou"),
    PaEvolution(epsilon_epoch=0.01, max_epochs=7, seed=3),
]


@pytest.mark.parametrize("est", ESTIMATORS,
                         ids=[type(e).__name__ for e in ESTIMATORS])
def test_clone_preserves_params(est):
    twin = clone(est)
    assert twin is not est
    assert twin.get_params() == est.get_params()


def test_set_params_round_trip():
    est = MaskRefiner()
    est.set_params(alpha=0.1, beta=0.9)
    assert est.get_params()["alpha"] == 0.1
    assert est.get_params()["beta"] == 0.9


def test_mask_refiner_transform_matches_function():
    sp = grid_superpixels(16, 4)
    bits = np.zeros((16, 16), dtype=bool)
    bits[0:4, 0:4] = True
    bits[4:6, 4:8] = True
    mask = BinaryMask(bits)
    est = MaskRefiner(alpha=0.3, beta=0.9)
    out = est.transform([(mask, sp), (mask, sp)])
    expected, _ = refine_mask(mask, sp,
                              RefineParams(alpha=0.3, beta=0.9))
    assert len(out) == 2
    for got in out:
        np.testing.assert_array_equal(got.bits, expected.bits)


def test_slic_estimator_matches_function():
    rng = np.random.default_rng(0)
    px = rng.integers(0, 256, size=(24, 24, 3), dtype=np.uint8)
    image = RgbImage(px)
    est = SlicSuperpixels(n_segments=4, compactness=8.0, max_iters=5)
    sp = est.fit_predict(image)
    direct = slic(image, SlicParams(k=4, compactness=8.0, max_iters=5))
    np.testing.assert_array_equal(sp.labels, direct.labels)
    assert est.n_regions_ == direct.region_count
    np.testing.assert_array_equal(est.labels_, direct.labels)


def test_otsu_estimator_matches_function():
    rng = np.random.default_rng(5)
    arr = np.where(rng.random((12, 12)) < 0.4, 0.1, 0.9)
    fmap = FloatMap(arr)
    est = OtsuBinarizer().fit(fmap)
    res = otsu_threshold(fmap)
    assert est.threshold_ == res.threshold
    assert est.bin_index_ == res.bin_index
    np.testing.assert_array_equal(est.transform(fmap).bits,
                                  binarize(fmap, res.threshold).bits)


def test_pa_evolution_requires_callbacks():
    incomplete = PaEvolution(trainer=StubTrainer())
    with pytest.raises(ValueError, match="must all be set"):
        incomplete.fit([])
