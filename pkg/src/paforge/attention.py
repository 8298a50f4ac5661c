"""Gradient-weighted attention maps and initial pseudo-annotation synthesis.

Given feature maps A (m channels of t' x h' x w') and the gradients of a class
score with respect to them, each channel gets the weight

    w_m = mean over (t', h', w') of dY/dA_m

and the attention volume is the ReLU of the weighted channel sum.  Per-frame
maps are thresholded (Otsu), the actor and action branches are unioned, and
the union is snapped to superpixels to form the first pseudo-annotation.
"""

from dataclasses import dataclass, field

import numpy as np

from ._validation import check_same_shape
from .errors import DegenerateInputError
from .rasters import FloatMap, mask_union
from .refine import RefineParams, refine_mask
from .slic import SlicParams, slic
from .thresholding import binarize, otsu_threshold

_MAX_RANK = 4


@dataclass(frozen=True, eq=False)
class Tensor:
    """Dense float tensor of rank 1..4, row-major, all finite.

    Accepts float32 or float64 storage; file serialization is float32.
    """

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data)
        if arr.dtype not in (np.float32, np.float64):
            arr = arr.astype(np.float32)
        if not (1 <= arr.ndim <= _MAX_RANK):
            raise ValueError(f"tensor rank must be 1..{_MAX_RANK}, got {arr.ndim}")
        if any(d < 1 for d in arr.shape):
            raise ValueError(f"tensor extents must be >= 1, got {tuple(arr.shape)}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("tensor values must all be finite")
        arr = np.ascontiguousarray(arr)
        arr.setflags(write=False)
        object.__setattr__(self, "data", arr)

    @property
    def rank(self):
        return self.data.ndim

    @property
    def dims(self):
        return tuple(self.data.shape)

    def __eq__(self, other):
        return (
            isinstance(other, Tensor)
            and self.data.dtype == other.data.dtype
            and np.array_equal(self.data, other.data)
        )


@dataclass(frozen=True)
class GcamRequest:
    """Feature maps and their gradients for one class, both rank 4.

    Both tensors are shaped (m, t', h', w'). The gradients are those of the
    class score for class_id; the backward pass that produced them happens
    outside this package.
    """

    features: Tensor
    gradients: Tensor
    class_id: int = 0

    def __post_init__(self):
        if self.features.rank != 4 or self.gradients.rank != 4:
            raise ValueError(
                "features and gradients must both be rank 4, got ranks "
                f"{self.features.rank} and {self.gradients.rank}"
            )
        check_same_shape(self.features.data, self.gradients.data,
                         "features", "gradients")
        if self.class_id < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")


def gcam_weights(request):
    """Per-channel weights: global average of the gradient volume.

    Returns a list of m floats.
    """
    g = request.gradients.data.astype(np.float64)
    return [float(v) for v in g.mean(axis=(1, 2, 3))]


def gcam_map(features, weights):
    """ReLU of the weight-summed feature channels.

    Args:
        features: rank-4 Tensor (m, t', h', w').
        weights: m channel weights, as a sequence or a rank-1 Tensor.

    Returns:
        Rank-3 Tensor (t', h', w') in float64.
    """
    if features.rank != 4:
        raise ValueError(f"features must be rank 4, got {features.rank}")
    if isinstance(weights, Tensor):
        if weights.rank != 1:
            raise ValueError(f"weights must be rank 1, got {weights.rank}")
        w = weights.data.astype(np.float64)
    else:
        w = np.asarray(weights, dtype=np.float64)
        if w.ndim != 1:
            raise ValueError(f"weights must be one-dimensional, got {w.ndim} dims")
    if w.shape[0] != features.dims[0]:
        raise ValueError(
            f"got {w.shape[0]} weights for {features.dims[0]} channels"
        )
    a = features.data.astype(np.float64)
    summed = np.tensordot(w, a, axes=(0, 0))
    return Tensor(np.maximum(summed, 0.0))


def split_temporal(volume):
    """Rank-3 Tensor (t', h', w') -> list of t' FloatMaps."""
    if volume.rank != 3:
        raise ValueError(f"expected a rank-3 tensor, got rank {volume.rank}")
    return [FloatMap(volume.data[i].astype(np.float64)) for i in range(volume.dims[0])]


def uniform_sample(t, t_prime):
    """Pick t' of t frame indices, evenly spread and center-biased.

    Index i of the sample sits at floor((i + 0.5) * t / t').
    """
    if t < 1:
        raise ValueError(f"t must be >= 1, got {t}")
    if not (1 <= t_prime <= t):
        raise ValueError(f"t_prime must lie in [1, t={t}], got {t_prime}")
    return [((2 * i + 1) * t) // (2 * t_prime) for i in range(t_prime)]


def upsample_bilinear(fmap, width, height):
    """Resize a FloatMap with bilinear interpolation, half-pixel centers.

    Sample positions follow the align_corners=False convention: output pixel
    centers map to (i + 0.5) * scale - 0.5 in source coordinates, clamped to
    the valid range.
    """
    if width < 1 or height < 1:
        raise ValueError(f"target size must be >= 1x1, got {width}x{height}")
    src = fmap.values
    sh, sw = src.shape
    xs = (np.arange(width, dtype=np.float64) + 0.5) * (sw / width) - 0.5
    ys = (np.arange(height, dtype=np.float64) + 0.5) * (sh / height) - 0.5
    xs = np.clip(xs, 0.0, sw - 1.0)
    ys = np.clip(ys, 0.0, sh - 1.0)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    x1 = np.minimum(x0 + 1, sw - 1)
    y1 = np.minimum(y0 + 1, sh - 1)
    fx = xs - x0
    fy = ys - y0
    top = src[y0][:, x0] * (1 - fx)[None, :] + src[y0][:, x1] * fx[None, :]
    bot = src[y1][:, x0] * (1 - fx)[None, :] + src[y1][:, x1] * fx[None, :]
    out = top * (1 - fy)[:, None] + bot * fy[:, None]
    return FloatMap(out)


@dataclass(frozen=True)
class PaV0Config:
    """Knobs for the initial-PA recipe; defaults mirror the stage-1 setup.

    t_prime is the per-video frame budget pipeline drivers feed to
    uniform_sample; generate_pa_v0 itself works on one frame at a time.
    """

    slic: SlicParams = field(default_factory=SlicParams)
    refine: RefineParams = field(default_factory=RefineParams)
    use_action_branch: bool = True
    t_prime: int = 1

    def __post_init__(self):
        if self.t_prime < 1:
            raise ValueError(f"t_prime must be >= 1, got {self.t_prime}")


def attention_to_mask(attention, width, height, branch="actor"):
    """Threshold one branch's attention map at frame resolution.

    Upsamples when the map is smaller than the frame, then Otsu-binarizes.
    A constant map raises DegenerateInputError naming the branch.
    """
    fmap = attention
    if (fmap.width, fmap.height) != (width, height):
        fmap = upsample_bilinear(fmap, width, height)
    vals = fmap.values
    if float(vals.min()) == float(vals.max()):
        raise DegenerateInputError(
            f"{branch} attention map is constant; no foreground can be separated"
        )
    res = otsu_threshold(fmap)
    return binarize(fmap, res.threshold)


def generate_pa_v0(frame, actor_attention, action_attention=None, config=None):
    """Initial pseudo-annotation for one frame.

    Args:
        frame: RgbImage.
        actor_attention: FloatMap from the actor branch (any resolution).
        action_attention: optional FloatMap from the action branch.
        config: PaV0Config; defaults apply when omitted.

    Returns:
        (BinaryMask, RefineReport): the refined mask and the report from the
        refinement pass that produced it.
    """
    if config is None:
        config = PaV0Config()
    mask = attention_to_mask(actor_attention, frame.width, frame.height, "actor")
    if config.use_action_branch and action_attention is not None:
        action_mask = attention_to_mask(
            action_attention, frame.width, frame.height, "action"
        )
        mask = mask_union(mask, action_mask)
    superpixels = slic(frame, config.slic)
    refined, report = refine_mask(mask, superpixels, config.refine)
    return refined, report
