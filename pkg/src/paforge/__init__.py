"""paforge: pseudo-annotation tooling for weakly-supervised video segmentation.

The package covers the label-free computational core of a select-train-predict
annotation evolution pipeline: attention-derived initial masks, Otsu
thresholding, SLIC superpixels, superpixel-snapped mask refinement,
cut-and-paste quality selection, region-integrity metrics, and the iterative
evolution loop with pluggable trainer/predictor/scorer callbacks.
"""

from .attention import (
    GcamRequest,
    PaV0Config,
    Tensor,
    attention_to_mask,
    gcam_map,
    gcam_weights,
    generate_pa_v0,
    split_temporal,
    uniform_sample,
    upsample_bilinear,
)
from .errors import (
    BadMagicError,
    ContractViolationError,
    DegenerateInputError,
    DimensionMismatchError,
    EmptySelectionError,
    ManifestError,
    MaskFormatError,
    PaForgeError,
    RankRangeError,
    ScorerError,
    TensorFormatError,
    TrailingDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .evolution import (
    EpochEval,
    EpochLoopResult,
    EvolutionConfig,
    FrameRecord,
    PaEvolution,
    VersionRecord,
    align_actions,
    evolve,
    run_epoch_loop,
)
from .fileio import (
    ManifestEntry,
    load_image,
    load_manifest,
    load_mask,
    load_tensor,
    save_image,
    save_manifest,
    save_mask,
    save_tensor,
)
from .metrics import (
    ClassLabelMap,
    EvalScores,
    RicParams,
    iou,
    mask_to_labelmap,
    miou_multiclass,
    miou_pa,
    miou_pa_multiclass,
    ric,
    rii,
    score_predictions,
)
from .protocol import LineProtocolClient, SubprocessModel, SubprocessScorers
from .rasters import (
    BBox,
    BinaryMask,
    FloatMap,
    GrayImage,
    RgbImage,
    SuperpixelMap,
    bbox_of_mask,
    crop_mask,
    mask_area,
    mask_boundary,
    mask_intersection,
    mask_union,
)
from .refine import (
    MaskRefiner,
    RefineParams,
    RefineReport,
    refine_batch,
    refine_mask,
)
from .selection import (
    CompositePatch,
    CoverageClassifier,
    FrameRef,
    MaskedForeground,
    Patch,
    ScorerSuite,
    SeamDiscriminator,
    SelectionResult,
    connected_components,
    cut_and_paste,
    foreground_patch,
    masked_foreground,
    sample_background_patch,
    select_pas,
)
from .slic import SlicParams, SlicSuperpixels, rgb_to_lab, slic
from .thresholding import OtsuBinarizer, OtsuResult, binarize, otsu_threshold

__version__ = "0.1.0"
