"""End-to-end tests for the command-line front end.

Most tests drive cli_dispatch in process and compare against direct library
calls; the serve-loop subcommands and environment handling run as real
subprocesses.
"""

import json
import os
import subprocess
import sys
from textwrap import dedent

import numpy as np
import pytest

from paforge.attention import Tensor
from paforge.cli import cli_dispatch
from paforge.fileio import (
    load_manifest,
    load_mask,
    load_tensor,
    resolve_manifest_path,
    save_image,
    save_mask,
    save_tensor,
)
from paforge.metrics import RicParams, score_predictions
from paforge.protocol import LineProtocolClient
from paforge.rasters import BinaryMask, FloatMap, RgbImage, mask_boundary
from paforge.refine import RefineParams, refine_mask
from paforge.slic import SlicParams, slic
from paforge.synthetic import build_blob_world, contract_toward, grid_superpixels
from paforge.thresholding import binarize, otsu_threshold

WORLD_FLAGS = ["--videos", "1", "--frames", "2", "--size", "96", "--cell", "8",
               "--cells", "0", "--blocks", "2", "--seed", "7"]


def world_twin():
    """The in-process twin of the corpus written by make-world."""
    return build_blob_world(n_videos=1, frames_per_video=2, size=96, cell=8,
                            corrupt_cells=0, corrupt_blocks=2, seed=7)


def cells_mask(size, cell, cells):
    per = size // cell
    bits = np.zeros((size, size), dtype=bool)
    for c in cells:
        cy, cx = divmod(c, per)
        bits[cy * cell:(cy + 1) * cell, cx * cell:(cx + 1) * cell] = True
    return BinaryMask(bits)


def flat_image(h, w, color):
    px = np.empty((h, w, 3), dtype=np.uint8)
    px[:, :] = color
    return RgbImage(px)


@pytest.fixture(scope="module")
def corpus(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "world"
    assert cli_dispatch(["make-world", "--out", str(out)] + WORLD_FLAGS) == 0
    return out


@pytest.fixture(scope="module")
def init_pa(corpus):
    out_dir = corpus.parent / "pa_v0"
    manifest_out = corpus.parent / "pa_manifest.txt"
    rc = cli_dispatch([
        "init-pa", "--manifest", str(corpus / "manifest.txt"),
        "--actor-dir", str(corpus / "attention" / "actor"),
        "--action-dir", str(corpus / "attention" / "action"),
        "--out-dir", str(out_dir), "--manifest-out", str(manifest_out),
        "--k", "144",
    ])
    assert rc == 0
    return manifest_out


def test_no_arguments_is_usage_error(capsys):
    assert cli_dispatch([]) == 1
    assert "usage" in capsys.readouterr().err.lower()


def test_unknown_subcommand_is_usage_error():
    assert cli_dispatch(["frobnicate"]) == 1


def test_missing_required_flag_is_usage_error():
    assert cli_dispatch(["otsu"]) == 1


def test_missing_input_is_data_error(tmp_path):
    assert cli_dispatch(["otsu", "--input", str(tmp_path / "nope.wstf")]) == 2


def test_bad_tensor_is_data_error(tmp_path):
    path = tmp_path / "junk.wstf"
    path.write_bytes(b"JUNKJUNKJUNKJUNK")
    assert cli_dispatch(["otsu", "--input", str(path)]) == 2


def test_otsu_reports_and_writes_mask(tmp_path, capsys):
    rng = np.random.default_rng(4)
    data = np.where(rng.random((20, 20)) < 0.5, 0.2, 0.8)
    data = data + rng.normal(0.0, 0.01, size=data.shape)
    path = tmp_path / "map.wstf"
    save_tensor(Tensor(data.astype(np.float32)), str(path))
    mask_out = tmp_path / "mask.png"
    capsys.readouterr()
    rc = cli_dispatch(["otsu", "--input", str(path),
                       "--mask-out", str(mask_out)])
    assert rc == 0
    lines = dict(line.split(None, 1)
                 for line in capsys.readouterr().out.strip().splitlines())
    fmap = FloatMap(load_tensor(str(path)).data.astype(np.float64))
    res = otsu_threshold(fmap)
    assert float(lines["threshold"]) == res.threshold
    assert int(lines["bin_index"]) == res.bin_index
    np.testing.assert_array_equal(load_mask(str(mask_out)).bits,
                                  binarize(fmap, res.threshold).bits)


def test_slic_matches_library(tmp_path, capsys):
    px = np.zeros((32, 32, 3), dtype=np.uint8)
    px[:16, :16] = (200, 40, 40)
    px[:16, 16:] = (40, 200, 40)
    px[16:, :16] = (40, 40, 200)
    px[16:, 16:] = (210, 210, 60)
    img_path = tmp_path / "frame.png"
    save_image(RgbImage(px), str(img_path))
    labels_out = tmp_path / "labels.wstf"
    capsys.readouterr()
    rc = cli_dispatch(["slic", "--input", str(img_path),
                       "--labels-out", str(labels_out), "--k", "4"])
    assert rc == 0
    sp = slic(RgbImage(px), SlicParams(k=4))
    assert capsys.readouterr().out.strip() == f"region_count {sp.region_count}"
    stored = load_tensor(str(labels_out)).data
    np.testing.assert_array_equal(np.rint(stored).astype(np.int32), sp.labels)


def refine_inputs(tmp_path):
    sp = grid_superpixels(32, 8)
    labels_path = tmp_path / "labels.wstf"
    save_tensor(Tensor(sp.labels.astype(np.float32)), str(labels_path))
    bits = np.zeros((32, 32), dtype=bool)
    bits[0:8, 0:8] = True
    bits[8:10, 8:16] = True
    mask_path = tmp_path / "mask.png"
    save_mask(BinaryMask(bits), str(mask_path))
    return sp, labels_path, mask_path


def test_refine_outputs_mask_and_report(tmp_path, capsys):
    sp, labels_path, mask_path = refine_inputs(tmp_path)
    mask_out = tmp_path / "refined.png"
    report_out = tmp_path / "report.txt"
    capsys.readouterr()
    rc = cli_dispatch(["refine", "--mask", str(mask_path),
                       "--labels", str(labels_path),
                       "--mask-out", str(mask_out),
                       "--report-out", str(report_out)])
    assert rc == 0
    refined, report = refine_mask(load_mask(str(mask_path)), sp, RefineParams())
    np.testing.assert_array_equal(load_mask(str(mask_out)).bits, refined.bits)
    out = capsys.readouterr().out
    rows = [line.split() for line in out.strip().splitlines()]
    assert len(rows) == sp.region_count
    assert {int(r[0]) for r in rows if r[3] == "1"} == set(report.selected_regions)
    for r in rows:
        rid = int(r[0])
        assert float(r[1]) == pytest.approx(report.overlap[rid], abs=5e-7)
        assert float(r[2]) == pytest.approx(report.area_ratio[rid], abs=5e-7)
    assert report_out.read_text() == out


def test_refine_overlay_requires_frame(tmp_path):
    _, labels_path, mask_path = refine_inputs(tmp_path)
    rc = cli_dispatch(["refine", "--mask", str(mask_path),
                       "--labels", str(labels_path),
                       "--mask-out", str(tmp_path / "refined.png"),
                       "--emit-overlay", str(tmp_path / "overlay.png")])
    assert rc == 1


def test_refine_writes_overlay(tmp_path):
    sp, labels_path, mask_path = refine_inputs(tmp_path)
    frame_path = tmp_path / "frame.png"
    save_image(flat_image(32, 32, (90, 90, 90)), str(frame_path))
    overlay_path = tmp_path / "overlay.png"
    rc = cli_dispatch(["refine", "--mask", str(mask_path),
                       "--labels", str(labels_path),
                       "--mask-out", str(tmp_path / "refined.png"),
                       "--frame", str(frame_path),
                       "--emit-overlay", str(overlay_path)])
    assert rc == 0
    refined, _ = refine_mask(load_mask(str(mask_path)), sp, RefineParams())
    boundary = mask_boundary(refined).bits
    assert boundary.any()
    overlay = load_image_pixels(overlay_path)
    assert (overlay[boundary] == (255, 0, 0)).all()
    assert (overlay[~boundary] == (90, 90, 90)).all()


def load_image_pixels(path):
    from paforge.fileio import load_image

    return load_image(str(path)).pixels


def metrics_inputs(tmp_path):
    sp = grid_superpixels(32, 8)
    save_tensor(Tensor(sp.labels.astype(np.float32)),
                str(tmp_path / "labels.wstf"))
    pas = [cells_mask(32, 8, c) for c in ({0, 1}, {5}, {0, 5, 10})]
    preds = [cells_mask(32, 8, c) for c in ({1}, {5, 6}, {0, 5})]
    off = preds[2].bits.copy()
    off[16:18, 16:24] = True
    preds[2] = BinaryMask(off)
    for i, (pred, pa) in enumerate(zip(preds, pas)):
        save_mask(pred, str(tmp_path / f"pred{i}.png"))
        save_mask(pa, str(tmp_path / f"pa{i}.png"))
    (tmp_path / "preds.txt").write_text(
        "".join(f"pred{i}.png\n" for i in range(3)))
    (tmp_path / "pas.txt").write_text(
        "".join(f"pa{i}.png\n" for i in range(3)))
    (tmp_path / "labels.txt").write_text("labels.wstf\n" * 3)
    return sp, preds, pas


@pytest.mark.parametrize("macro", [False, True])
def test_metrics_matches_library(tmp_path, capsys, macro):
    sp, preds, pas = metrics_inputs(tmp_path)
    argv = ["metrics", "--pred-list", str(tmp_path / "preds.txt"),
            "--pa-list", str(tmp_path / "pas.txt"),
            "--labels-list", str(tmp_path / "labels.txt")]
    if macro:
        argv.append("--macro")
    capsys.readouterr()
    assert cli_dispatch(argv) == 0
    scores = score_predictions(preds, pas, [sp] * 3,
                               refine_params=RefineParams(),
                               ric_params=RicParams(alpha=0.5), macro=macro)
    expected = "\t".join(f"{v:.6f}" for v in
                         (scores.miou_pa, scores.rii, scores.ric,
                          scores.miou_pa))
    assert capsys.readouterr().out.strip() == expected


def test_metrics_list_length_mismatch(tmp_path):
    metrics_inputs(tmp_path)
    (tmp_path / "short.txt").write_text("pa0.png\n")
    rc = cli_dispatch(["metrics", "--pred-list", str(tmp_path / "preds.txt"),
                       "--pa-list", str(tmp_path / "short.txt"),
                       "--labels-list", str(tmp_path / "labels.txt")])
    assert rc == 2


def test_metrics_requires_a_region_source(tmp_path):
    metrics_inputs(tmp_path)
    rc = cli_dispatch(["metrics", "--pred-list", str(tmp_path / "preds.txt"),
                       "--pa-list", str(tmp_path / "pas.txt")])
    assert rc == 1


def test_make_world_layout_matches_twin(corpus):
    entries = load_manifest(str(corpus / "manifest.txt"))
    world = world_twin()
    assert len(entries) == len(world.frames)
    for entry, wf in zip(entries, world.frames):
        assert entry.video_id == wf.ref.video_id
        assert entry.frame_index == wf.ref.frame_index
        assert entry.pa_path is None
        stem = f"{entry.video_id}_{entry.frame_index:04d}"
        frame = load_image_pixels(
            resolve_manifest_path(str(corpus / "manifest.txt"),
                                  entry.frame_path))
        np.testing.assert_array_equal(frame, wf.image.pixels)
        gt = load_mask(str(corpus / "gt" / f"{stem}.png"))
        np.testing.assert_array_equal(gt.bits, wf.gt.bits)
        for branch in ("actor", "action"):
            att = load_tensor(
                str(corpus / "attention" / branch / f"{stem}.wstf"))
            assert att.dims == (1, 48, 48)


def test_make_world_is_reproducible(corpus, tmp_path):
    again = tmp_path / "again"
    assert cli_dispatch(["make-world", "--out", str(again)] + WORLD_FLAGS) == 0
    assert (corpus / "manifest.txt").read_text() == \
        (again / "manifest.txt").read_text()
    for rel in ("gt/video000_0000.png", "frames/video000_0001.png",
                "attention/actor/video000_0000.wstf"):
        assert (corpus / rel).read_bytes() == (again / rel).read_bytes()


def test_init_pa_recovers_cell_union(init_pa):
    entries = load_manifest(str(init_pa))
    world = world_twin()
    assert len(entries) == len(world.frames)
    for entry, wf in zip(entries, world.frames):
        assert entry.pa_path is not None
        pa = load_mask(resolve_manifest_path(str(init_pa), entry.pa_path))
        np.testing.assert_array_equal(pa.bits, wf.initial_pa.bits)


def ref_scorer_cmd(corpus):
    return (f"{sys.executable} -m paforge ref-scorer "
            f"--gt-dir {corpus / 'gt'} --tolerance 8")


def test_select_cli_round_trip(init_pa, corpus, tmp_path, capsys):
    selected_out = tmp_path / "selected.txt"
    capsys.readouterr()
    rc = cli_dispatch(["select", "--manifest", str(init_pa),
                       "--selected-out", str(selected_out),
                       "--scorer-cmd", ref_scorer_cmd(corpus),
                       "--workdir", str(tmp_path / "work"),
                       "--seed", "0"])
    assert rc == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2
    for line in lines:
        vid, idx, reason = line.split()
        assert vid == "video000"
        assert reason == "strict"
    selected = load_manifest(str(selected_out))
    assert len(selected) == 2
    for entry in selected:
        assert os.path.exists(
            resolve_manifest_path(str(selected_out), entry.pa_path))


def test_select_requires_pa_paths(corpus, tmp_path):
    rc = cli_dispatch(["select", "--manifest", str(corpus / "manifest.txt"),
                       "--selected-out", str(tmp_path / "s.txt"),
                       "--scorer-cmd", "true"])
    assert rc == 2


def test_evolve_dead_model_is_contract_error(init_pa, tmp_path):
    scorer = tmp_path / "scorer.py"
    scorer.write_text(dedent("""\
        import sys
        for line in sys.stdin:
            print("1.0" if line.split()[0] == "D" else "0.0 1.0")
            sys.stdout.flush()
    """))
    rc = cli_dispatch([
        "evolve", "--manifest", str(init_pa),
        "--out-dir", str(tmp_path / "out"),
        "--model-cmd", f"{sys.executable} -c 'import sys; sys.exit(1)'",
        "--scorer-cmd", f"{sys.executable} {scorer}",
        "--workdir", str(tmp_path / "work"),
        "--val-stride", "2", "--k", "144",
    ])
    assert rc == 3


def test_ref_model_server_round_trip(corpus, tmp_path):
    world = world_twin()
    wf = world.frames[0]
    pa_path = tmp_path / "pa.png"
    save_mask(wf.initial_pa, str(pa_path))
    manifest = tmp_path / "sel.txt"
    manifest.write_text("")
    client = LineProtocolClient(
        f"{sys.executable} -m paforge ref-model "
        f"--gt-dir {corpus / 'gt'} --contraction 0.5")
    try:
        state0 = tmp_path / "s0.json"
        assert client.request(f"T {manifest} - {state0}") == str(state0)
        assert json.loads(state0.read_text()) == {"epoch": 0}
        state1 = tmp_path / "s1.json"
        assert client.request(f"T {manifest} {state0} {state1}") == str(state1)
        assert json.loads(state1.read_text()) == {"epoch": 1}
        frame_path = corpus / "frames" / "video000_0000.png"
        out_path = tmp_path / "pred.png"
        assert client.request(
            f"P {state1} {frame_path} {pa_path} {out_path}") == str(out_path)
        expected = contract_toward(wf.initial_pa, wf.gt, fraction=0.5)
        np.testing.assert_array_equal(load_mask(str(out_path)).bits,
                                      expected.bits)
    finally:
        client.close()


def test_ref_scorer_server_round_trip(tmp_path):
    gt_dir = tmp_path / "gt"
    gt_dir.mkdir()
    gt_bits = np.zeros((16, 16), dtype=bool)
    gt_bits[:8, :8] = True
    save_mask(BinaryMask(gt_bits), str(gt_dir / "vid_0000.png"))

    src = flat_image(12, 12, (100, 100, 100))
    src_path = tmp_path / "src.png"
    save_image(src, str(src_path))
    seam_mask = np.zeros((12, 12), dtype=bool)
    seam_mask[4:8, 4:8] = True
    mask_path = tmp_path / "mask.png"
    save_mask(BinaryMask(seam_mask), str(mask_path))
    smooth_path = tmp_path / "smooth.png"
    save_image(src, str(smooth_path))
    glaring = src.pixels.copy()
    glaring[seam_mask] = (255, 255, 255)
    glaring_path = tmp_path / "glaring.png"
    save_image(RgbImage(glaring), str(glaring_path))

    cover = np.ones((8, 8), dtype=bool)
    cover_path = tmp_path / "cover.png"
    save_mask(BinaryMask(cover), str(cover_path))

    client = LineProtocolClient(
        f"{sys.executable} -m paforge ref-scorer "
        f"--gt-dir {gt_dir} --tolerance 8")
    try:
        assert client.request(
            f"D {smooth_path} {mask_path} {src_path}") == "1.000000"
        assert client.request(
            f"D {glaring_path} {mask_path} {src_path}") == "0.000000"
        # the 8x8 cover at (4, 4) overlaps a quarter of the 64-pixel blob
        assert client.request(
            f"C {cover_path} {cover_path} vid 0 4 4") == "0.750000 0.250000"
        assert client.request(
            f"C {cover_path} {cover_path} vid 0 0 0") == "0.000000 1.000000"
    finally:
        client.close()


def test_log_env_toggles_info(corpus, tmp_path):
    def run(env_value):
        env = dict(os.environ)
        env.pop("PA_FORGE_LOG", None)
        if env_value:
            env["PA_FORGE_LOG"] = env_value
        tag = env_value or "default"
        return subprocess.run(
            [sys.executable, "-m", "paforge", "init-pa",
             "--manifest", str(corpus / "manifest.txt"),
             "--actor-dir", str(corpus / "attention" / "actor"),
             "--out-dir", str(tmp_path / f"pa_{tag}"),
             "--manifest-out", str(tmp_path / f"m_{tag}.txt"),
             "--k", "144"],
            env=env, capture_output=True, text=True, timeout=120)

    loud = run("info")
    assert loud.returncode == 0
    assert "init-pa" in loud.stderr
    quiet = run(None)
    assert quiet.returncode == 0
    assert quiet.stderr == ""


def test_module_entry_reports_usage():
    run = subprocess.run([sys.executable, "-m", "paforge"],
                         capture_output=True, text=True, timeout=60)
    assert run.returncode == 1
    assert "usage" in run.stderr.lower()
