"""Quality-based pseudo-annotation selection.

Each candidate frame's annotation is split into connected components; every
component above the minimum area is cut out as a square patch, pasted onto a
background patch sampled from the same video, and scored:

  1. A discriminator scores the composite's realism in [0, 1].  Scores above
     disc_threshold accept the component outright ("strict").
  2. Otherwise a classifier scores the masked foreground; probability above
     cls_threshold for the expected class accepts it ("relaxed").

A frame is selected only if every scored component passes.  Scorer exceptions
reject the frame and are recorded, never raised.
"""

import random
from dataclasses import dataclass

import numpy as np
from scipy import ndimage

from ._validation import check_same_shape
from .errors import ScorerError
from .rasters import BBox, BinaryMask, RgbImage, bbox_of_mask, crop_mask

MIN_COMPONENT_AREA = 25
MAX_BG_TRIES = 200

REASON_STRICT = "strict"
REASON_RELAXED = "relaxed"
REASON_REJECTED = "rejected"

_EIGHT_CONN = np.ones((3, 3), dtype=bool)


@dataclass(frozen=True, order=True)
class FrameRef:
    """Identity of a frame inside a dataset: (video_id, frame_index)."""

    video_id: str
    frame_index: int

    def __post_init__(self):
        if self.frame_index < 0:
            raise ValueError(f"frame_index must be >= 0, got {self.frame_index}")


@dataclass(frozen=True)
class Patch:
    """A square crop taken from a known frame."""

    source: FrameRef
    box: BBox
    pixels: RgbImage

    def __post_init__(self):
        if (self.pixels.width, self.pixels.height) != (self.box.width, self.box.height):
            raise ValueError(
                f"patch pixels {self.pixels.width}x{self.pixels.height} do not "
                f"match box {self.box.width}x{self.box.height}"
            )


@dataclass(frozen=True)
class MaskedForeground:
    """Foreground patch with non-mask pixels zeroed."""

    patch: Patch
    mask: BinaryMask

    def __post_init__(self):
        check_same_shape(self.patch.pixels.pixels[..., 0], self.mask.bits,
                         "patch", "mask")


@dataclass(frozen=True)
class CompositePatch:
    """Foreground component pasted onto a sampled background patch."""

    image: RgbImage
    mask: BinaryMask
    fg_origin: Patch
    bg_origin: Patch

    def __post_init__(self):
        check_same_shape(self.image.pixels[..., 0], self.mask.bits,
                         "composite", "mask")


@dataclass(frozen=True)
class ScorerSuite:
    """Pluggable scorer callbacks plus their acceptance thresholds.

    discriminator: CompositePatch -> float in [0, 1].
    classifier: MaskedForeground -> sequence of class probabilities
        summing to 1.
    expected_class: index the classifier probability is read from.
    """

    discriminator: object
    classifier: object
    disc_threshold: float = 0.5
    cls_threshold: float = 0.5
    expected_class: int = 1

    def __post_init__(self):
        if not callable(self.discriminator) or not callable(self.classifier):
            raise TypeError("discriminator and classifier must be callable")
        for name in ("disc_threshold", "cls_threshold"):
            v = float(getattr(self, name))
            if not (0.0 <= v <= 1.0):
                raise ValueError(f"{name} must lie in [0, 1], got {v}")
        if self.expected_class < 0:
            raise ValueError(
                f"expected_class must be >= 0, got {self.expected_class}"
            )


@dataclass(frozen=True)
class ComponentScore:
    """Outcome for one connected component of a candidate."""

    area: int
    disc_score: float
    cls_prob: float = None
    reason: str = REASON_REJECTED


@dataclass(frozen=True)
class FrameOutcome:
    ref: FrameRef
    reason: str
    components: tuple = ()
    note: str = ""


@dataclass(frozen=True)
class SelectionResult:
    """Aggregate outcome of select_pas.

    selected: refs of accepted frames, in candidate order.
    outcomes: one FrameOutcome per candidate, same order as the input.
    errors: (ref, message) pairs for scorer failures.
    """

    selected: tuple
    outcomes: tuple
    errors: tuple = ()

    def __post_init__(self):
        object.__setattr__(self, "selected", tuple(self.selected))
        object.__setattr__(self, "outcomes", tuple(self.outcomes))
        object.__setattr__(self, "errors", tuple(self.errors))


def connected_components(mask, min_area=0):
    """8-connected components of a mask as a list of BinaryMasks.

    Ordered by first pixel in row-major scan; components with area <= min_area
    are dropped.
    """
    cc, n = ndimage.label(mask.bits, structure=_EIGHT_CONN)
    out = []
    for i in range(1, n + 1):
        comp = cc == i
        if int(np.count_nonzero(comp)) > min_area:
            out.append(BinaryMask(comp))
    return out


def foreground_patch(frame, component_mask):
    """Square patch around a component's bounding box.

    The side equals the longer bbox side; the box is centered on the bbox and
    clamped inside the frame, shrinking only when the frame itself is smaller
    than the side.

    Returns:
        BBox of the patch; pair with extract_patch to materialize it.
    """
    box = bbox_of_mask(component_mask)
    if box is None:
        raise ValueError("cannot build a foreground patch for an empty mask")
    side = max(box.width, box.height)
    side = min(side, frame.width, frame.height)
    x0 = box.x - (side - box.width) // 2
    y0 = box.y - (side - box.height) // 2
    x0 = min(max(x0, 0), frame.width - side)
    y0 = min(max(y0, 0), frame.height - side)
    return BBox(x=x0, y=y0, width=side, height=side)


def extract_patch(ref, frame, box):
    """Cut a Patch out of a frame."""
    ys, xs = box.slices()
    return Patch(source=ref, box=box, pixels=RgbImage(frame.pixels[ys, xs, :]))


def sample_background_patch(frames, width, height, rng_seed=0, rng=None):
    """Sample a background patch avoiding annotated pixels.

    Args:
        frames: sequence of (FrameRef, RgbImage, BinaryMask) triples to draw
            from, typically all frames of one video.
        width, height: patch extent.
        rng_seed: seed when no rng is supplied.
        rng: optional random.Random to consume (preferred by callers that
            need one deterministic stream across many draws).

    Returns:
        Patch.  Up to 200 uniform draws look for a patch free of annotated
        pixels; if none is found the draw with the fewest annotated pixels
        (first among ties) wins.

    Raises:
        ValueError: if frames is empty or no frame fits the patch.
    """
    frames = list(frames)
    if not frames:
        raise ValueError("no frames to sample a background patch from")
    fitting = [
        (ref, img, pa)
        for ref, img, pa in frames
        if img.width >= width and img.height >= height
    ]
    if not fitting:
        raise ValueError(
            f"no frame is large enough for a {width}x{height} background patch"
        )
    if rng is None:
        rng = random.Random(rng_seed)
    best = None
    best_overlap = None
    for _ in range(MAX_BG_TRIES):
        ref, img, pa = fitting[rng.randrange(len(fitting))]
        x0 = rng.randrange(img.width - width + 1)
        y0 = rng.randrange(img.height - height + 1)
        overlap = int(np.count_nonzero(pa.bits[y0:y0 + height, x0:x0 + width]))
        if best_overlap is None or overlap < best_overlap:
            best_overlap = overlap
            best = (ref, img, BBox(x=x0, y=y0, width=width, height=height))
        if overlap == 0:
            break
    ref, img, box = best
    return extract_patch(ref, img, box)


def cut_and_paste(fg_patch, mask, bg_patch):
    """Composite a foreground patch onto a background patch through a mask."""
    if (fg_patch.box.width, fg_patch.box.height) != (
        bg_patch.box.width,
        bg_patch.box.height,
    ):
        raise ValueError(
            f"foreground patch {fg_patch.box.width}x{fg_patch.box.height} and "
            f"background patch {bg_patch.box.width}x{bg_patch.box.height} differ"
        )
    check_same_shape(fg_patch.pixels.pixels[..., 0], mask.bits, "patch", "mask")
    out = np.where(mask.bits[..., None], fg_patch.pixels.pixels,
                   bg_patch.pixels.pixels)
    return CompositePatch(
        image=RgbImage(out), mask=mask, fg_origin=fg_patch, bg_origin=bg_patch
    )


def masked_foreground(fg_patch, mask):
    """Zero out non-mask pixels of a foreground patch."""
    check_same_shape(fg_patch.pixels.pixels[..., 0], mask.bits, "patch", "mask")
    pixels = np.where(mask.bits[..., None], fg_patch.pixels.pixels, 0)
    return MaskedForeground(
        patch=Patch(source=fg_patch.source, box=fg_patch.box,
                    pixels=RgbImage(pixels.astype(np.uint8))),
        mask=mask,
    )


def _validate_probs(probs, expected_class):
    probs = [float(p) for p in probs]
    if expected_class >= len(probs):
        raise ScorerError(
            f"classifier returned {len(probs)} probabilities but "
            f"expected_class is {expected_class}"
        )
    if any(p < 0 for p in probs) or abs(sum(probs) - 1.0) > 1e-6:
        raise ScorerError(
            f"classifier probabilities must be nonnegative and sum to 1, "
            f"got {probs}"
        )
    return probs


def _score_component(ref, frame, comp, videos, suite, rng):
    box = foreground_patch(frame, comp)
    fg = extract_patch(ref, frame, box)
    crop = crop_mask(comp, box)
    bg = sample_background_patch(videos[ref.video_id], box.width, box.height,
                                 rng=rng)
    composite = cut_and_paste(fg, crop, bg)
    disc = float(suite.discriminator(composite))
    if not (0.0 <= disc <= 1.0):
        raise ScorerError(f"discriminator score {disc} outside [0, 1]")
    area = int(np.count_nonzero(comp.bits))
    if disc > suite.disc_threshold:
        return ComponentScore(area=area, disc_score=disc, reason=REASON_STRICT)
    probs = _validate_probs(suite.classifier(masked_foreground(fg, crop)),
                            suite.expected_class)
    p = probs[suite.expected_class]
    if p > suite.cls_threshold:
        return ComponentScore(area=area, disc_score=disc, cls_prob=p,
                              reason=REASON_RELAXED)
    return ComponentScore(area=area, disc_score=disc, cls_prob=p,
                          reason=REASON_REJECTED)


def select_pas(candidates, videos, scorers, rng_seed=0):
    """Select the candidate frames whose annotations look trustworthy.

    Args:
        candidates: sequence of (FrameRef, RgbImage, BinaryMask) triples.
        videos: mapping video_id -> sequence of (FrameRef, RgbImage,
            BinaryMask) triples used as background patch sources.
        scorers: ScorerSuite.
        rng_seed: seed for background patch sampling; identical inputs and
            seed give an identical SelectionResult.

    Returns:
        SelectionResult.  A frame is selected when all of its components pass
        (strict before relaxed); frames whose annotation is empty, has no
        component above the minimum area, or hits a scorer error are rejected.
    """
    rng = random.Random(rng_seed)
    selected = []
    outcomes = []
    errors = []
    for ref, frame, pa in candidates:
        check_same_shape(frame.pixels[..., 0], pa.bits, "frame", "annotation")
        if ref.video_id not in videos:
            raise KeyError(f"no background source frames for video {ref.video_id!r}")
        comps = connected_components(pa, MIN_COMPONENT_AREA)
        if not comps:
            outcomes.append(FrameOutcome(
                ref=ref, reason=REASON_REJECTED,
                note="no component above minimum area"))
            continue
        scores = []
        failed = None
        for comp in comps:
            try:
                scores.append(_score_component(ref, frame, comp, videos,
                                               scorers, rng))
            except ScorerError as exc:
                failed = str(exc)
                break
        if failed is not None:
            errors.append((ref, failed))
            outcomes.append(FrameOutcome(
                ref=ref, reason=REASON_REJECTED, components=tuple(scores),
                note=f"scorer error: {failed}"))
            continue
        reasons = {s.reason for s in scores}
        if REASON_REJECTED in reasons:
            frame_reason = REASON_REJECTED
        elif reasons == {REASON_STRICT}:
            frame_reason = REASON_STRICT
        else:
            frame_reason = REASON_RELAXED
        outcomes.append(FrameOutcome(ref=ref, reason=frame_reason,
                                     components=tuple(scores)))
        if frame_reason != REASON_REJECTED:
            selected.append(ref)
    return SelectionResult(selected=tuple(selected), outcomes=tuple(outcomes),
                           errors=tuple(errors))


class SeamDiscriminator:
    """Reference discriminator: flags composites with pasted-in seams.

    Walks every 4-neighbor pixel pair straddling the mask boundary and calls a
    pair spurious when the composite shows a color step there (above
    tolerance) that the foreground's source frame does not.  The score is the
    fraction of non-spurious boundary pairs, 1.0 when the seam introduces no
    new discontinuity.
    """

    def __init__(self, tolerance=8):
        self.tolerance = int(tolerance)

    def __call__(self, composite):
        mask = composite.mask.bits
        comp = composite.image.pixels.astype(np.int16)
        src = composite.fg_origin.pixels.pixels.astype(np.int16)
        total = 0
        spurious = 0
        for axis in (0, 1):
            a = [slice(None), slice(None)]
            b = [slice(None), slice(None)]
            a[axis] = slice(None, -1)
            b[axis] = slice(1, None)
            a, b = tuple(a), tuple(b)
            boundary = mask[a] != mask[b]
            if not boundary.any():
                continue
            e_comp = np.abs(comp[a] - comp[b]).max(axis=2)[boundary]
            e_src = np.abs(src[a] - src[b]).max(axis=2)[boundary]
            bad = (e_comp > self.tolerance) & (e_src <= self.tolerance)
            total += int(boundary.sum())
            spurious += int(bad.sum())
        if total == 0:
            return 1.0
        return 1.0 - spurious / total


@dataclass(frozen=True)
class CoverageClassifier:
    """Reference classifier: probability from hidden ground-truth coverage.

    Looks up the frame's ground truth, measures how much of it the masked
    foreground covers, and reports that fraction as the probability of
    target_class, remainder on class 0.
    """

    ground_truth: dict
    class_count: int = 2
    target_class: int = 1

    def __call__(self, mf):
        ref = mf.patch.source
        if ref not in self.ground_truth:
            raise ScorerError(f"no ground truth for frame {ref}")
        gt = self.ground_truth[ref]
        ys, xs = mf.patch.box.slices()
        covered = int(np.count_nonzero(mf.mask.bits & gt.bits[ys, xs]))
        total = int(np.count_nonzero(gt.bits))
        p = covered / total if total else 0.0
        probs = [0.0] * self.class_count
        probs[self.target_class] = p
        probs[0] += 1.0 - p
        return probs
