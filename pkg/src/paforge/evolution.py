"""Iterative pseudo-annotation evolution.

One version of the loop: select trustworthy annotations, train a model on
them epoch by epoch, score each epoch on the validation split with the region
integrity criterion (RIC), keep the best-scoring epoch's model, and replace
every frame's annotation with that model's refined prediction.  Versions stop
when the best RIC plateaus or max_versions is reached.

The trainer and predictor are pluggable callbacks:

    trainer(handle_or_None, selected_records) -> new model handle
    predictor(handle, frame_record) -> BinaryMask at frame resolution

Handles are opaque to this module.  Both callbacks must be deterministic for
a given seed and input if reproducible runs are wanted.
"""

import logging
from collections import Counter
from dataclasses import dataclass, field, replace

from sklearn.base import BaseEstimator

from .errors import ContractViolationError, EmptySelectionError
from .metrics import RicParams, score_predictions
from .rasters import BinaryMask, SuperpixelMap
from .refine import RefineParams, refine_mask
from .selection import FrameRef, ScorerSuite, select_pas

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FrameRecord:
    """One dataset row carried through the evolution loop.

    superpixels are the stage-1 maps, computed once and reused for every
    refinement of this frame.  validation rows are scored, never trained on.
    """

    ref: FrameRef
    image: object
    superpixels: SuperpixelMap
    pa: BinaryMask
    validation: bool = False


@dataclass(frozen=True)
class EvolutionConfig:
    epsilon_epoch: float = 0.005
    epsilon_version: float = 0.005
    max_epochs: int = 50
    max_versions: int = 5
    ric: RicParams = field(default_factory=RicParams)
    refine: RefineParams = field(default_factory=RefineParams)

    def __post_init__(self):
        if self.epsilon_epoch < 0 or self.epsilon_version < 0:
            raise ValueError("epsilon_epoch and epsilon_version must be >= 0")
        if self.max_epochs < 1 or self.max_versions < 1:
            raise ValueError("max_epochs and max_versions must be >= 1")


@dataclass(frozen=True)
class EpochEval:
    """Validation scores plus the raw predictions behind them."""

    ric: float
    miou_pa: float
    rii: float
    predictions: tuple = ()


@dataclass(frozen=True)
class EpochLoopResult:
    best_model: object
    best_epoch: int
    ric_trace: tuple
    evals: tuple


@dataclass(frozen=True)
class VersionRecord:
    """Audit record of one select-train-predict version.

    ric_max always equals max(epoch_ric_trace) and best_epoch attains it.
    pa_snapshot holds the refreshed annotation of every dataset row, in row
    order; val_predictions holds each epoch's raw validation predictions so
    the recorded scores can be recomputed offline.
    """

    version: int
    selected_count: int
    selected_refs: tuple
    epoch_ric_trace: tuple
    best_epoch: int
    ric_max: float
    pa_snapshot: tuple
    val_predictions: tuple


def run_epoch_loop(train_step, evaluate, config=None):
    """Train epoch by epoch until the RIC trace flattens.

    Args:
        train_step: callable(handle_or_None) -> handle, one epoch of training.
        evaluate: callable(handle) -> EpochEval on the validation split.
        config: EvolutionConfig; epsilon_epoch and max_epochs apply here.

    Returns:
        EpochLoopResult.  The best model is the earliest epoch attaining the
        maximum RIC (strictly-greater updates).  The loop stops when the
        absolute change between consecutive RIC values drops below
        epsilon_epoch, or after max_epochs.
    """
    if config is None:
        config = EvolutionConfig()
    model = None
    best_model = None
    best_epoch = -1
    best_ric = None
    trace = []
    evals = []
    for epoch in range(config.max_epochs):
        model = train_step(model)
        ev = evaluate(model)
        trace.append(ev.ric)
        evals.append(ev)
        logger.debug("epoch %d: ric=%.6f miou_pa=%.6f rii=%.6f",
                     epoch, ev.ric, ev.miou_pa, ev.rii)
        if best_ric is None or ev.ric > best_ric:
            best_ric = ev.ric
            best_model = model
            best_epoch = epoch
        if epoch >= 1 and abs(trace[epoch] - trace[epoch - 1]) < config.epsilon_epoch:
            break
    return EpochLoopResult(
        best_model=best_model,
        best_epoch=best_epoch,
        ric_trace=tuple(trace),
        evals=tuple(evals),
    )


def _predict(predictor, model, record):
    pred = predictor(model, record)
    if not isinstance(pred, BinaryMask):
        raise ContractViolationError(
            f"predictor returned {type(pred).__name__} for frame "
            f"{record.ref}, expected BinaryMask"
        )
    if (pred.height, pred.width) != (record.pa.height, record.pa.width):
        raise ContractViolationError(
            f"predictor output {pred.width}x{pred.height} does not match "
            f"frame {record.ref} at {record.pa.width}x{record.pa.height}"
        )
    return pred


def _ric_evaluator(predictor, val_records, config):
    def evaluate(model):
        preds = [_predict(predictor, model, rec) for rec in val_records]
        scores = score_predictions(
            preds,
            [rec.pa for rec in val_records],
            [rec.superpixels for rec in val_records],
            refine_params=config.refine,
            ric_params=config.ric,
        )
        return EpochEval(ric=scores.ric, miou_pa=scores.miou_pa,
                         rii=scores.rii, predictions=tuple(preds))
    return evaluate


def evolve(records, trainer, predictor, scorers, config=None, rng_seed=0):
    """Run the full select-train-predict loop.

    Args:
        records: sequence of FrameRecord; at least one training and one
            validation row.
        trainer / predictor: model callbacks, see the module docstring.
        scorers: ScorerSuite for quality selection.
        config: EvolutionConfig; defaults apply when omitted.
        rng_seed: base seed; version i selects with seed rng_seed + i.

    Returns:
        (final_model, [VersionRecord, ...]).  The final model is the best
        epoch's handle of the last version.

    Raises:
        EmptySelectionError: if a version selects no frames.
    """
    if config is None:
        config = EvolutionConfig()
    if not isinstance(scorers, ScorerSuite):
        raise TypeError(f"scorers must be a ScorerSuite, got {type(scorers).__name__}")
    records = list(records)
    if not records:
        raise ValueError("records must be nonempty")
    train_rows = [r for r in records if not r.validation]
    val_rows = [r for r in records if r.validation]
    if not train_rows or not val_rows:
        raise ValueError(
            f"need both training and validation rows, got {len(train_rows)} "
            f"training and {len(val_rows)} validation"
        )
    version_records = []
    final_model = None
    prev_ric_max = None
    for version in range(config.max_versions):
        videos = {}
        for r in records:
            videos.setdefault(r.ref.video_id, []).append((r.ref, r.image, r.pa))
        candidates = [(r.ref, r.image, r.pa) for r in records if not r.validation]
        sel = select_pas(candidates, videos, scorers, rng_seed=rng_seed + version)
        if not sel.selected:
            raise EmptySelectionError()
        selected_set = set(sel.selected)
        selected_records = [r for r in records if r.ref in selected_set]
        logger.info("version %d: selected %d/%d frames",
                    version, len(selected_records), len(candidates))

        loop = run_epoch_loop(
            lambda handle: trainer(handle, selected_records),
            _ric_evaluator(predictor, [r for r in records if r.validation], config),
            config,
        )
        ric_max = max(loop.ric_trace)
        new_pas = []
        for rec in records:
            raw = _predict(predictor, loop.best_model, rec)
            refined, _ = refine_mask(raw, rec.superpixels, config.refine)
            new_pas.append(refined)
        version_records.append(VersionRecord(
            version=version,
            selected_count=len(sel.selected),
            selected_refs=tuple(sel.selected),
            epoch_ric_trace=loop.ric_trace,
            best_epoch=loop.best_epoch,
            ric_max=ric_max,
            pa_snapshot=tuple(new_pas),
            val_predictions=tuple(ev.predictions for ev in loop.evals),
        ))
        final_model = loop.best_model
        records = [replace(r, pa=p) for r, p in zip(records, new_pas)]
        logger.info("version %d: ric_max=%.6f best_epoch=%d",
                    version, ric_max, loop.best_epoch)
        if prev_ric_max is not None and abs(ric_max - prev_ric_max) < config.epsilon_version:
            break
        prev_ric_max = ric_max
    return final_model, version_records


def align_actions(labels, window=9, confidences=None):
    """Smooth per-frame action labels by windowed majority vote.

    Args:
        labels: sequence of hashable labels, one per frame, in time order.
        window: odd vote window size centered on each frame; clipped at the
            sequence ends.
        confidences: optional per-frame floats; ties in the vote count are
            broken by summed confidence, then by the label appearing earliest
            in the whole sequence.

    Returns:
        List of smoothed labels, same length as the input.
    """
    if window < 1 or window % 2 == 0:
        raise ValueError(f"window must be a positive odd number, got {window}")
    labels = list(labels)
    if confidences is not None:
        confidences = [float(c) for c in confidences]
        if len(confidences) != len(labels):
            raise ValueError(
                f"got {len(labels)} labels but {len(confidences)} confidences"
            )
    first_seen = {}
    for idx, lab in enumerate(labels):
        first_seen.setdefault(lab, idx)
    half = window // 2
    out = []
    for i in range(len(labels)):
        lo = max(0, i - half)
        hi = min(len(labels), i + half + 1)
        votes = Counter(labels[lo:hi])
        top = max(votes.values())
        tied = [lab for lab, n in votes.items() if n == top]
        if len(tied) > 1 and confidences is not None:
            conf = {lab: 0.0 for lab in tied}
            for j in range(lo, hi):
                if labels[j] in conf:
                    conf[labels[j]] += confidences[j]
            best = max(conf.values())
            tied = [lab for lab in tied if conf[lab] == best]
        out.append(min(tied, key=first_seen.__getitem__))
    return out


class PaEvolution(BaseEstimator):
    """Estimator wrapper around evolve().

    fit(records) runs the loop; afterwards model_, version_records_ and
    ric_trace_ hold the outcome.
    """

    def __init__(self, trainer=None, predictor=None, scorers=None,
                 epsilon_epoch=0.005, epsilon_version=0.005, max_epochs=50,
                 max_versions=5, ric_alpha=0.5, refine_alpha=0.5,
                 refine_beta=0.4, overlap_mode="overlap_ratio", seed=0):
        self.trainer = trainer
        self.predictor = predictor
        self.scorers = scorers
        self.epsilon_epoch = epsilon_epoch
        self.epsilon_version = epsilon_version
        self.max_epochs = max_epochs
        self.max_versions = max_versions
        self.ric_alpha = ric_alpha
        self.refine_alpha = refine_alpha
        self.refine_beta = refine_beta
        self.overlap_mode = overlap_mode
        self.seed = seed

    def _config(self):
        return EvolutionConfig(
            epsilon_epoch=self.epsilon_epoch,
            epsilon_version=self.epsilon_version,
            max_epochs=self.max_epochs,
            max_versions=self.max_versions,
            ric=RicParams(alpha=self.ric_alpha),
            refine=RefineParams(alpha=self.refine_alpha, beta=self.refine_beta,
                                overlap_mode=self.overlap_mode),
        )

    def fit(self, X, y=None):
        if self.trainer is None or self.predictor is None or self.scorers is None:
            raise ValueError("trainer, predictor and scorers must all be set")
        model, versions = evolve(X, self.trainer, self.predictor, self.scorers,
                                 config=self._config(), rng_seed=self.seed)
        self.model_ = model
        self.version_records_ = versions
        self.ric_trace_ = [v.ric_max for v in versions]
        return self
