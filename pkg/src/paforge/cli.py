"""Command-line front end.

Thin shell over the library: every subcommand is reproducible by calling the
corresponding operation directly.  Exit codes: 0 success, 1 usage error,
2 data error (malformed or missing input), 3 contract/scorer error.  Log
verbosity comes from the PA_FORGE_LOG environment variable (error, info,
debug; default error).
"""

import argparse
import json
import logging
import os
import sys

import numpy as np

from .attention import PaV0Config, Tensor, generate_pa_v0
from .errors import (
    ContractViolationError,
    EmptySelectionError,
    PaForgeError,
    ScorerError,
)
from .evolution import EvolutionConfig, FrameRecord, evolve
from .fileio import (
    ManifestEntry,
    load_image,
    load_manifest,
    load_mask,
    load_tensor,
    resolve_manifest_path,
    save_image,
    save_manifest,
    save_mask,
    save_tensor,
)
from .metrics import RicParams, score_predictions
from .protocol import SubprocessModel, SubprocessScorers, serve_lines
from .rasters import BBox, FloatMap, RgbImage, mask_boundary
from .refine import RefineParams, refine_mask
from .selection import FrameRef, SeamDiscriminator, select_pas
from .slic import SlicParams, slic
from .synthetic import build_blob_world, contract_toward
from .thresholding import binarize, otsu_threshold

logger = logging.getLogger(__name__)

_LOG_LEVELS = {"error": logging.ERROR, "info": logging.INFO, "debug": logging.DEBUG}


class UsageError(Exception):
    def __init__(self, parser, message):
        super().__init__(message)
        self.parser = parser


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(self, message)


def _frame_stem(video_id, frame_index):
    return f"{video_id}_{frame_index:04d}"


def _rel_to_manifest(manifest_path, path):
    """Manifest entries resolve against the manifest's directory."""
    base = os.path.dirname(os.path.abspath(manifest_path))
    return os.path.relpath(os.path.abspath(path), base)


def _tensor_to_float_map(tensor, path):
    data = tensor.data
    if data.ndim == 3 and data.shape[0] == 1:
        data = data[0]
    if data.ndim != 2:
        raise PaForgeError(
            f"{path}: expected a rank-2 map (or rank-3 with a single leading "
            f"extent), got dims {tensor.dims}"
        )
    return FloatMap(data.astype(np.float64))


def _labels_to_superpixels(tensor, path):
    data = tensor.data
    if data.ndim != 2:
        raise PaForgeError(f"{path}: label map must be rank 2, got {tensor.dims}")
    labels = np.rint(data).astype(np.int32)
    if not np.allclose(data, labels, atol=1e-3):
        raise PaForgeError(f"{path}: label map holds non-integer values")
    from .rasters import SuperpixelMap

    return SuperpixelMap(labels=labels, region_count=int(labels.max()) + 1)


def _write_overlay(image, mask, path):
    boundary = mask_boundary(mask)
    out = image.pixels.copy()
    out[boundary.bits] = (255, 0, 0)
    save_image(RgbImage(out), path)


def _slic_params(args):
    return SlicParams(
        k=args.k,
        compactness=args.compactness,
        max_iters=args.max_iters,
        enforce_connectivity=not args.no_enforce_connectivity,
    )


def _refine_params(args):
    return RefineParams(alpha=args.alpha, beta=args.beta, overlap_mode=args.mode)


def _add_slic_flags(p):
    p.add_argument("--k", type=int, default=400, help="target superpixel count")
    p.add_argument("--compactness", type=float, default=10.0)
    p.add_argument("--max-iters", type=int, default=10)
    p.add_argument("--no-enforce-connectivity", action="store_true")


def _add_refine_flags(p):
    p.add_argument("--alpha", type=float, default=0.5,
                   help="region overlap gate (exclusive)")
    p.add_argument("--beta", type=float, default=0.4,
                   help="region area-ratio gate (exclusive)")
    p.add_argument("--mode", choices=("overlap_ratio", "strict_iou"),
                   default="overlap_ratio")


def _cmd_otsu(args):
    res = otsu_threshold(_tensor_to_float_map(load_tensor(args.input), args.input))
    print(f"threshold {res.threshold!r}")
    print(f"between_class_variance {res.between_class_variance!r}")
    print(f"bin_index {res.bin_index}")
    if args.mask_out:
        fmap = _tensor_to_float_map(load_tensor(args.input), args.input)
        save_mask(binarize(fmap, res.threshold), args.mask_out)
    return 0


def _cmd_slic(args):
    sp = slic(load_image(args.input), _slic_params(args))
    save_tensor(Tensor(sp.labels.astype(np.float32)), args.labels_out)
    print(f"region_count {sp.region_count}")
    return 0


def _cmd_refine(args):
    mask = load_mask(args.mask)
    sp = _labels_to_superpixels(load_tensor(args.labels), args.labels)
    refined, report = refine_mask(mask, sp, _refine_params(args))
    save_mask(refined, args.mask_out)
    selected = set(report.selected_regions)
    lines = []
    for rid in range(sp.region_count):
        lines.append(
            f"{rid} {report.overlap[rid]:.6f} {report.area_ratio[rid]:.6f} "
            f"{1 if rid in selected else 0}"
        )
    text = "\n".join(lines)
    print(text)
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    if args.emit_overlay:
        if not args.frame:
            raise UsageError(None, "--emit-overlay requires --frame")
        _write_overlay(load_image(args.frame), refined, args.emit_overlay)
    return 0


def _attention_path(att_dir, entry):
    return os.path.join(att_dir, _frame_stem(entry.video_id, entry.frame_index) + ".wstf")


def _cmd_init_pa(args):
    entries = load_manifest(args.manifest)
    os.makedirs(args.out_dir, exist_ok=True)
    if args.emit_overlay:
        os.makedirs(args.emit_overlay, exist_ok=True)
    config = PaV0Config(slic=_slic_params(args), refine=_refine_params(args))
    out_entries = []
    for entry in entries:
        frame = load_image(resolve_manifest_path(args.manifest, entry.frame_path))
        actor_path = _attention_path(args.actor_dir, entry)
        actor = _tensor_to_float_map(load_tensor(actor_path), actor_path)
        action = None
        if args.action_dir:
            action_path = _attention_path(args.action_dir, entry)
            action = _tensor_to_float_map(load_tensor(action_path), action_path)
        pa, _ = generate_pa_v0(frame, actor, action, config)
        stem = _frame_stem(entry.video_id, entry.frame_index)
        pa_path = os.path.join(args.out_dir, stem + ".png")
        save_mask(pa, pa_path)
        logger.info("init-pa %s/%d -> %s", entry.video_id, entry.frame_index, pa_path)
        if args.emit_overlay:
            _write_overlay(frame, pa,
                           os.path.join(args.emit_overlay, stem + ".png"))
        out_entries.append(ManifestEntry(
            video_id=entry.video_id, frame_index=entry.frame_index,
            frame_path=_rel_to_manifest(
                args.manifest_out,
                resolve_manifest_path(args.manifest, entry.frame_path)),
            pa_path=_rel_to_manifest(args.manifest_out, pa_path),
            label=entry.label,
        ))
    save_manifest(out_entries, args.manifest_out)
    print(args.manifest_out)
    return 0


def _load_dataset(manifest_path, require_pa=True):
    entries = load_manifest(manifest_path)
    rows = []
    for entry in entries:
        if entry.pa_path is None:
            if require_pa:
                raise PaForgeError(
                    f"manifest row {entry.video_id}/{entry.frame_index} has "
                    f"no pseudo-annotation path"
                )
            continue
        ref = FrameRef(video_id=entry.video_id, frame_index=entry.frame_index)
        image = load_image(resolve_manifest_path(manifest_path, entry.frame_path))
        pa = load_mask(resolve_manifest_path(manifest_path, entry.pa_path))
        rows.append((ref, image, pa, entry))
    if not rows:
        raise PaForgeError(f"{manifest_path}: no usable rows")
    return rows


def _scorer_suite(args, workdir):
    if args.scorer_cmd:
        scorers = SubprocessScorers(args.scorer_cmd,
                                    os.path.join(workdir, "scorer"))
        suite = scorers.suite(
            disc_threshold=args.disc_threshold,
            cls_threshold=args.cls_threshold,
            expected_class=args.expected_class,
        )
        return suite, scorers
    raise UsageError(None, "--scorer-cmd is required")


def _cmd_select(args):
    rows = _load_dataset(args.manifest)
    candidates = [(ref, image, pa) for ref, image, pa, _ in rows]
    videos = {}
    for ref, image, pa, _ in rows:
        videos.setdefault(ref.video_id, []).append((ref, image, pa))
    suite, scorers = _scorer_suite(args, args.workdir)
    try:
        result = select_pas(candidates, videos, suite, rng_seed=args.seed)
    finally:
        scorers.close()
    by_ref = {ref: entry for ref, _, _, entry in rows}
    selected_entries = [
        ManifestEntry(
            video_id=e.video_id, frame_index=e.frame_index,
            frame_path=_rel_to_manifest(
                args.selected_out, resolve_manifest_path(args.manifest, e.frame_path)),
            pa_path=_rel_to_manifest(
                args.selected_out, resolve_manifest_path(args.manifest, e.pa_path)),
            label=e.label,
        )
        for e in (by_ref[ref] for ref in result.selected)
    ]
    save_manifest(selected_entries, args.selected_out)
    for outcome in result.outcomes:
        print(f"{outcome.ref.video_id} {outcome.ref.frame_index} {outcome.reason}")
    for ref, message in result.errors:
        logger.error("scorer failure on %s/%d: %s",
                     ref.video_id, ref.frame_index, message)
    return 0


def _read_list(path):
    base = os.path.dirname(os.path.abspath(path))
    out = []
    with open(path, "r", encoding="utf-8") as fh:
        for raw in fh:
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            out.append(line if os.path.isabs(line) else os.path.join(base, line))
    return out


def _cmd_metrics(args):
    pred_paths = _read_list(args.pred_list)
    pa_paths = _read_list(args.pa_list)
    if len(pred_paths) != len(pa_paths):
        raise PaForgeError(
            f"prediction list has {len(pred_paths)} rows but pa list has "
            f"{len(pa_paths)}"
        )
    preds = [load_mask(p) for p in pred_paths]
    pas = [load_mask(p) for p in pa_paths]
    if args.labels_list:
        label_paths = _read_list(args.labels_list)
        if len(label_paths) != len(preds):
            raise PaForgeError(
                f"labels list has {len(label_paths)} rows, expected {len(preds)}"
            )
        maps = [_labels_to_superpixels(load_tensor(p), p) for p in label_paths]
    elif args.frames_list:
        frame_paths = _read_list(args.frames_list)
        if len(frame_paths) != len(preds):
            raise PaForgeError(
                f"frames list has {len(frame_paths)} rows, expected {len(preds)}"
            )
        params = _slic_params(args)
        maps = [slic(load_image(p), params) for p in frame_paths]
    else:
        raise UsageError(None, "provide --labels-list or --frames-list")
    scores = score_predictions(
        preds, pas, maps,
        refine_params=_refine_params(args),
        ric_params=RicParams(alpha=args.ric_alpha),
        macro=args.macro,
    )
    per_class = [scores.miou_pa]
    fields = [scores.miou_pa, scores.rii, scores.ric] + per_class
    print("\t".join(f"{v:.6f}" for v in fields))
    return 0


def _cmd_evolve(args):
    rows = _load_dataset(args.manifest)
    by_video = {}
    for ref, image, pa, entry in rows:
        by_video.setdefault(ref.video_id, []).append(ref)
    val_refs = set()
    for vid, refs in by_video.items():
        for pos, ref in enumerate(sorted(refs)):
            if pos % args.val_stride == args.val_stride - 1:
                val_refs.add(ref)
    slic_params = _slic_params(args)
    records = []
    for ref, image, pa, _ in rows:
        sp = slic(image, slic_params)
        records.append(FrameRecord(
            ref=ref, image=image, superpixels=sp, pa=pa,
            validation=ref in val_refs,
        ))
    n_val = sum(1 for r in records if r.validation)
    logger.info("evolve: %d rows, %d validation", len(records), n_val)

    config = EvolutionConfig(
        epsilon_epoch=args.eps_epoch,
        epsilon_version=args.eps_version,
        max_epochs=args.max_epochs,
        max_versions=args.max_versions,
        ric=RicParams(alpha=args.ric_alpha),
        refine=_refine_params(args),
    )
    suite, scorers = _scorer_suite(args, args.workdir)
    model = SubprocessModel(args.model_cmd, os.path.join(args.workdir, "model"))
    try:
        final_model, versions = evolve(
            records, model.train, model.predict, suite,
            config=config, rng_seed=args.seed,
        )
    finally:
        scorers.close()
        model.close()

    os.makedirs(args.out_dir, exist_ok=True)
    report_lines = []
    for v in versions:
        report_lines.append(
            f"{v.version} {v.selected_count} {v.best_epoch} {v.ric_max:.6f}"
        )
        pa_dir = os.path.join(args.out_dir, f"pa_v{v.version + 1}")
        os.makedirs(pa_dir, exist_ok=True)
        for rec, pa in zip(records, v.pa_snapshot):
            save_mask(pa, os.path.join(
                pa_dir, _frame_stem(rec.ref.video_id, rec.ref.frame_index) + ".png"))
    text = "\n".join(report_lines)
    print(text)
    if args.report_out:
        with open(args.report_out, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    final_dir = os.path.join(args.out_dir, f"pa_v{versions[-1].version + 1}")
    final_manifest = os.path.join(args.out_dir, "final_manifest.txt")
    entries = [
        ManifestEntry(
            video_id=rec.ref.video_id, frame_index=rec.ref.frame_index,
            frame_path=_rel_to_manifest(
                final_manifest,
                resolve_manifest_path(args.manifest, entry.frame_path)),
            pa_path=_rel_to_manifest(final_manifest, os.path.join(
                final_dir, _frame_stem(rec.ref.video_id, rec.ref.frame_index) + ".png")),
            label=entry.label,
        )
        for rec, (_, _, _, entry) in zip(records, rows)
    ]
    save_manifest(entries, final_manifest)
    return 0


def _cmd_make_world(args):
    world = build_blob_world(
        n_videos=args.videos, frames_per_video=args.frames, size=args.size,
        cell=args.cell, corrupt_cells=args.cells, corrupt_blocks=args.blocks,
        seed=args.seed,
    )
    out = args.out
    for sub in ("frames", "gt", "attention/actor", "attention/action"):
        os.makedirs(os.path.join(out, sub), exist_ok=True)
    half = args.size // 2
    entries = []
    for wf in world.frames:
        stem = _frame_stem(wf.ref.video_id, wf.ref.frame_index)
        frame_path = os.path.join(out, "frames", stem + ".png")
        save_image(wf.image, frame_path)
        save_mask(wf.gt, os.path.join(out, "gt", stem + ".png"))
        actor, action = _world_attention(wf, world, half)
        save_tensor(actor, os.path.join(out, "attention", "actor", stem + ".wstf"))
        save_tensor(action, os.path.join(out, "attention", "action", stem + ".wstf"))
        entries.append(ManifestEntry(
            video_id=wf.ref.video_id, frame_index=wf.ref.frame_index,
            frame_path=os.path.join("frames", stem + ".png"),
        ))
    manifest_path = os.path.join(out, "manifest.txt")
    save_manifest(entries, manifest_path)
    print(manifest_path)
    return 0


def _world_attention(wf, world, half):
    """Half-resolution actor/action maps whose union covers the initial PA.

    Corrupted regions alternate between the two branches so that the union
    step of initial-PA synthesis is actually exercised.
    """
    per = world.cells_per_side
    hcell = world.cell // 2
    actor = np.full((half, half), 0.05, dtype=np.float32)
    action = np.full((half, half), 0.05, dtype=np.float32)
    gt_cells = []
    for c in range(per * per):
        cy, cx = divmod(c, per)
        sl = (slice(cy * world.cell, (cy + 1) * world.cell),
              slice(cx * world.cell, (cx + 1) * world.cell))
        if wf.gt.bits[sl].any():
            gt_cells.append(c)
    for target in (actor, action):
        for c in gt_cells:
            cy, cx = divmod(c, per)
            target[cy * hcell:(cy + 1) * hcell, cx * hcell:(cx + 1) * hcell] = 0.95
    for i, c in enumerate(wf.corrupt_cells):
        target = actor if i % 2 == 0 else action
        cy, cx = divmod(c, per)
        target[cy * hcell:(cy + 1) * hcell, cx * hcell:(cx + 1) * hcell] = 0.95
    return (Tensor(actor[None, :, :]), Tensor(action[None, :, :]))


def _gt_for_frame(gt_dir, frame_path):
    stem = os.path.splitext(os.path.basename(frame_path))[0]
    if stem.endswith("_frame"):
        stem = stem[: -len("_frame")]
    path = os.path.join(gt_dir, stem + ".png")
    if not os.path.exists(path):
        raise FileNotFoundError(f"no ground truth at {path}")
    return load_mask(path)


def _cmd_ref_scorer(args):
    disc = SeamDiscriminator(tolerance=args.tolerance)

    def handler(tokens):
        kind = tokens[0]
        if kind == "D":
            comp_path, mask_path, src_path = tokens[1:4]
            comp_img = load_image(comp_path)
            mask = load_mask(mask_path)
            src_img = load_image(src_path)
            from .selection import CompositePatch, Patch

            box = BBox(x=0, y=0, width=comp_img.width, height=comp_img.height)
            ref = FrameRef(video_id="wire", frame_index=0)
            patch = Patch(source=ref, box=box, pixels=src_img)
            composite = CompositePatch(image=comp_img, mask=mask,
                                       fg_origin=patch, bg_origin=patch)
            return f"{disc(composite):.6f}"
        if kind == "C":
            fg_path, mask_path, video_id, frame_index, x, y = tokens[1:7]
            mask = load_mask(mask_path)
            gt = _gt_for_frame(
                args.gt_dir, _frame_stem(video_id, int(frame_index)) + ".png")
            x, y = int(x), int(y)
            crop = gt.bits[y:y + mask.height, x:x + mask.width]
            covered = int(np.count_nonzero(mask.bits & crop))
            total = int(np.count_nonzero(gt.bits))
            p = covered / total if total else 0.0
            return f"{1.0 - p:.6f} {p:.6f}"
        raise ValueError(f"unknown request kind {kind!r}")

    serve_lines(handler)
    return 0


def _cmd_ref_model(args):
    def handler(tokens):
        kind = tokens[0]
        if kind == "T":
            _manifest, state_in, state_out = tokens[1:4]
            epoch = 0
            if state_in != "-":
                with open(state_in, "r", encoding="utf-8") as fh:
                    epoch = json.load(fh)["epoch"] + 1
            with open(state_out, "w", encoding="utf-8") as fh:
                json.dump({"epoch": epoch}, fh)
            return state_out
        if kind == "P":
            _state, frame_path, pa_path, out_path = tokens[1:5]
            pa = load_mask(pa_path)
            gt = _gt_for_frame(args.gt_dir, frame_path)
            pred = contract_toward(pa, gt, fraction=args.contraction)
            save_mask(pred, out_path)
            return out_path
        raise ValueError(f"unknown request kind {kind!r}")

    serve_lines(handler)
    return 0


def build_parser():
    parser = _Parser(prog="pa-forge", description=__doc__)
    sub = parser.add_subparsers(dest="command", metavar="subcommand",
                                parser_class=_Parser)

    p = sub.add_parser("otsu",
                       help="threshold a float map tensor")
    p.add_argument("--input", required=True, help="WSTF float map (rank 2)")
    p.add_argument("--mask-out", help="write the binarized mask PNG here")
    p.set_defaults(func=_cmd_otsu)

    p = sub.add_parser("slic",
                       help="superpixel-segment an image")
    p.add_argument("--input", required=True, help="frame image")
    p.add_argument("--labels-out", required=True,
                   help="write labels as a rank-2 WSTF tensor here")
    _add_slic_flags(p)
    p.set_defaults(func=_cmd_slic)

    p = sub.add_parser("refine",
                       help="snap a mask to superpixels")
    p.add_argument("--mask", required=True, help="mask PNG")
    p.add_argument("--labels", required=True, help="label-map WSTF tensor")
    p.add_argument("--mask-out", required=True)
    p.add_argument("--report-out", help="also write the region report here")
    p.add_argument("--frame", help="frame image for --emit-overlay")
    p.add_argument("--emit-overlay", help="write a boundary overlay PNG here")
    _add_refine_flags(p)
    p.set_defaults(func=_cmd_refine)

    p = sub.add_parser("init-pa",
                       help="generate initial pseudo-annotations from attention")
    p.add_argument("--manifest", required=True)
    p.add_argument("--actor-dir", required=True,
                   help="directory of <video>_<frame>.wstf actor attention maps")
    p.add_argument("--action-dir",
                   help="optional directory of action attention maps")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--manifest-out", required=True)
    p.add_argument("--emit-overlay", metavar="DIR",
                   help="write boundary overlay PNGs into this directory")
    _add_slic_flags(p)
    _add_refine_flags(p)
    p.set_defaults(func=_cmd_init_pa)

    p = sub.add_parser("select",
                       help="quality-select pseudo-annotations")
    p.add_argument("--manifest", required=True,
                   help="manifest with pa paths")
    p.add_argument("--selected-out", required=True,
                   help="write the manifest of selected rows here")
    p.add_argument("--scorer-cmd", required=True,
                   help="scorer server command (line protocol)")
    p.add_argument("--workdir", default="pa_forge_work")
    p.add_argument("--disc-threshold", type=float, default=0.5)
    p.add_argument("--cls-threshold", type=float, default=0.5)
    p.add_argument("--expected-class", type=int, default=1)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=_cmd_select)

    p = sub.add_parser("metrics",
                       help="score predictions against pseudo-annotations")
    p.add_argument("--pred-list", required=True,
                   help="text file of prediction mask paths")
    p.add_argument("--pa-list", required=True,
                   help="text file of pseudo-annotation mask paths")
    p.add_argument("--labels-list",
                   help="text file of label-map WSTF paths (for refinement)")
    p.add_argument("--frames-list",
                   help="text file of frame paths; superpixels are recomputed")
    p.add_argument("--ric-alpha", type=float, default=0.5)
    p.add_argument("--macro", action="store_true",
                   help="macro-average miou_pa instead of micro")
    _add_slic_flags(p)
    _add_refine_flags(p)
    p.set_defaults(func=_cmd_metrics)

    p = sub.add_parser("evolve",
                       help="run the select-train-predict loop")
    p.add_argument("--manifest", required=True, help="manifest with pa paths")
    p.add_argument("--out-dir", required=True)
    p.add_argument("--report-out")
    p.add_argument("--model-cmd", required=True,
                   help="model server command (line protocol)")
    p.add_argument("--scorer-cmd", required=True)
    p.add_argument("--workdir", default="pa_forge_work")
    p.add_argument("--max-versions", type=int, default=5)
    p.add_argument("--eps-version", type=float, default=0.005)
    p.add_argument("--eps-epoch", type=float, default=0.005)
    p.add_argument("--max-epochs", type=int, default=50)
    p.add_argument("--ric-alpha", type=float, default=0.5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--val-stride", type=int, default=4,
                   help="every val-stride-th frame per video validates")
    p.add_argument("--disc-threshold", type=float, default=0.5)
    p.add_argument("--cls-threshold", type=float, default=0.5)
    p.add_argument("--expected-class", type=int, default=1)
    _add_slic_flags(p)
    _add_refine_flags(p)
    p.set_defaults(func=_cmd_evolve)

    p = sub.add_parser("make-world",
                       help="write a synthetic blob world to disk")
    p.add_argument("--out", required=True)
    p.add_argument("--videos", type=int, default=20)
    p.add_argument("--frames", type=int, default=8)
    p.add_argument("--size", type=int, default=96)
    p.add_argument("--cell", type=int, default=8)
    p.add_argument("--blocks", type=int, default=5,
                   help="isolated 2x2-cell corrupted blocks per frame")
    p.add_argument("--cells", type=int, default=0,
                   help="scattered corrupted cells per frame")
    p.add_argument("--seed", type=int, default=7)
    p.set_defaults(func=_cmd_make_world)

    p = sub.add_parser("ref-scorer",
                       help="serve the reference scorers over the line protocol")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--tolerance", type=int, default=8)
    p.set_defaults(func=_cmd_ref_scorer)

    p = sub.add_parser("ref-model",
                       help="serve the reference model over the line protocol")
    p.add_argument("--gt-dir", required=True)
    p.add_argument("--contraction", type=float, default=0.25)
    p.set_defaults(func=_cmd_ref_model)

    return parser


def _configure_logging():
    level_name = os.environ.get("PA_FORGE_LOG", "error").lower()
    level = _LOG_LEVELS.get(level_name, logging.ERROR)
    logging.basicConfig(
        level=level, stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
    )
    logging.getLogger("paforge").setLevel(level)


def main(argv=None):
    _configure_logging()
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        where = exc.parser if exc.parser is not None else parser
        where.print_usage(sys.stderr)
        print(f"pa-forge: error: {exc}", file=sys.stderr)
        return 1
    except SystemExit as exc:
        return int(exc.code or 0)
    if not getattr(args, "func", None):
        parser.print_usage(sys.stderr)
        print("pa-forge: error: a subcommand is required", file=sys.stderr)
        return 1
    try:
        return args.func(args)
    except UsageError as exc:
        print(f"pa-forge: error: {exc}", file=sys.stderr)
        return 1
    except (ScorerError, ContractViolationError, EmptySelectionError) as exc:
        logger.error("%s", exc)
        print(f"pa-forge: error: {exc}", file=sys.stderr)
        return 3
    except (PaForgeError, OSError, ValueError, KeyError) as exc:
        logger.error("%s", exc)
        print(f"pa-forge: error: {exc}", file=sys.stderr)
        return 2


def cli_dispatch(argv):
    """Library-level entry point: argv (without the program name) -> exit code."""
    try:
        code = main(list(argv))
    except SystemExit as exc:
        code = exc.code if isinstance(exc.code, int) else 0
    return int(code) if code is not None else 0


if __name__ == "__main__":
    sys.exit(main())
