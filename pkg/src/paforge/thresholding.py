"""Otsu thresholding over a fixed 256-bin histogram.

The input map is min-max normalized, bucketed into 256 equal-width bins, and
the split maximizing between-class variance is chosen.  Class statistics use
the exact per-bin value sums rather than bin centers, so two-valued inputs
produce the textbook variance.  The returned threshold is the upper edge of
the winning bin mapped back to input units, which guarantees that binarizing
with it never yields an all-set or all-empty mask.
"""

from dataclasses import dataclass

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.exceptions import NotFittedError

from ._validation import as_float_map
from .errors import DegenerateInputError
from .rasters import BinaryMask

_BINS = 256


@dataclass(frozen=True)
class OtsuResult:
    """Outcome of a threshold search.

    threshold: split value in input units; binarize keeps values strictly above.
    between_class_variance: the maximized objective at the chosen split.
    bin_index: winning histogram bin b; values bucketed <= b fall below.
    """

    threshold: float
    between_class_variance: float
    bin_index: int


def otsu_threshold(fmap):
    """Find the variance-maximizing threshold of a FloatMap.

    Args:
        fmap: FloatMap (or 2-D array-like) with at least two distinct values.

    Returns:
        OtsuResult.  Ties in the objective resolve to the lowest bin.

    Raises:
        DegenerateInputError: if the map is constant.
    """
    fmap = as_float_map(fmap)
    values = fmap.values.ravel()
    lo = float(values.min())
    hi = float(values.max())
    if lo == hi:
        raise DegenerateInputError(
            f"cannot threshold a constant map (all values equal {lo})"
        )
    norm = (values - lo) / (hi - lo)
    bins = np.minimum((norm * _BINS).astype(np.int64), _BINS - 1)
    counts = np.bincount(bins, minlength=_BINS).astype(np.float64)
    sums = np.bincount(bins, weights=norm, minlength=_BINS)

    cum_counts = np.cumsum(counts)
    cum_sums = np.cumsum(sums)
    total = cum_counts[-1]
    grand_sum = cum_sums[-1]

    # Candidate split after bin b keeps bins <= b in the low class.
    low_n = cum_counts[:-1]
    high_n = total - low_n
    valid = (low_n > 0) & (high_n > 0)
    with np.errstate(invalid="ignore", divide="ignore"):
        mu_low = cum_sums[:-1] / low_n
        mu_high = (grand_sum - cum_sums[:-1]) / high_n
        sigma = (low_n / total) * (high_n / total) * (mu_low - mu_high) ** 2
    sigma = np.where(valid, sigma, -1.0)

    b = int(np.argmax(sigma))
    threshold = lo + (b + 1) / _BINS * (hi - lo)
    return OtsuResult(
        threshold=float(threshold),
        between_class_variance=float(sigma[b]),
        bin_index=b,
    )


def binarize(fmap, threshold):
    """Mask of pixels strictly above the threshold."""
    fmap = as_float_map(fmap)
    t = float(threshold)
    if not np.isfinite(t):
        raise ValueError(f"threshold must be finite, got {threshold}")
    return BinaryMask(fmap.values > t)


class OtsuBinarizer(BaseEstimator, TransformerMixin):
    """Estimator wrapper around otsu_threshold / binarize.

    fit() learns the threshold from a map; transform() applies it, to the
    same map or to others on the same value scale.
    """

    def fit(self, X, y=None):
        res = otsu_threshold(X)
        self.threshold_ = res.threshold
        self.between_class_variance_ = res.between_class_variance
        self.bin_index_ = res.bin_index
        return self

    def transform(self, X):
        if not hasattr(self, "threshold_"):
            raise NotFittedError(
                "This OtsuBinarizer instance is not fitted yet. "
                "Call 'fit' before 'transform'."
            )
        return binarize(X, self.threshold_)
