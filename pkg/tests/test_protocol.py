"""Line protocol: in-process server loop and real subprocess round trips."""

import io
import json
import sys
import textwrap

import numpy as np
import pytest

from paforge.errors import ContractViolationError, ScorerError
from paforge.evolution import FrameRecord
from paforge.protocol import (
    LineProtocolClient,
    SubprocessModel,
    SubprocessScorers,
    serve_lines,
)
from paforge.rasters import BBox, BinaryMask, RgbImage
from paforge.selection import CompositePatch, FrameRef, Patch, masked_foreground
from paforge.synthetic import grid_superpixels


def test_serve_lines_answers_per_request():
    out = io.StringIO()
    serve_lines(lambda toks: " ".join(reversed(toks)),
                stdin=io.StringIO("a b c\n\nx y\n"), stdout=out)
    assert out.getvalue() == "c b a\ny x\n"


def test_serve_lines_wraps_exceptions_and_continues():
    def handler(tokens):
        if tokens[0] == "boom":
            raise RuntimeError("it\nbroke")
        return "ok"

    out = io.StringIO()
    serve_lines(handler, stdin=io.StringIO("boom\ngood\n"), stdout=out)
    assert out.getvalue() == "ERR it broke\nok\n"


def _spawn(tmp_path, body, name="server.py"):
    script = tmp_path / name
    script.write_text(textwrap.dedent(body))
    return [sys.executable, str(script)]


def test_client_round_trip_over_subprocess(tmp_path):
    command = _spawn(tmp_path, """
        from paforge.protocol import serve_lines
        serve_lines(lambda toks: " ".join(reversed(toks)))
    """)
    with LineProtocolClient(command) as client:
        assert client.request("a b c") == "c b a"
        assert client.request("1 2") == "2 1"


def test_client_turns_err_lines_into_scorer_errors(tmp_path):
    command = _spawn(tmp_path, """
        from paforge.protocol import serve_lines

        def handle(tokens):
            raise ValueError("cannot score " + tokens[0])

        serve_lines(handle)
    """)
    with LineProtocolClient(command) as client:
        with pytest.raises(ScorerError, match="cannot score D"):
            client.request("D x y z")
        # the server loop survives its own errors
        with pytest.raises(ScorerError, match="cannot score C"):
            client.request("C x")


def test_client_reports_dead_server(tmp_path):
    command = _spawn(tmp_path, "import sys\nsys.exit(3)\n")
    client = LineProtocolClient(command)
    try:
        with pytest.raises(ScorerError):
            client.request("D x")
        client.proc.wait()
        with pytest.raises(ScorerError, match="exited"):
            client.request("D x")
    finally:
        client.close()


def _composite():
    rng = np.random.default_rng(801)
    box = BBox(x=0, y=0, width=6, height=6)
    fg = Patch(source=FrameRef("v", 0), box=box,
               pixels=RgbImage(rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)))
    bg = Patch(source=FrameRef("v", 1), box=box,
               pixels=RgbImage(rng.integers(0, 256, (6, 6, 3), dtype=np.uint8)))
    bits = np.zeros((6, 6), dtype=bool)
    bits[1:5, 1:5] = True
    image = np.where(bits[..., None], fg.pixels.pixels, bg.pixels.pixels)
    comp = CompositePatch(image=RgbImage(image.astype(np.uint8)),
                          mask=BinaryMask(bits), fg_origin=fg, bg_origin=bg)
    return comp, fg


def test_subprocess_scorers_round_trip(tmp_path):
    command = _spawn(tmp_path, """
        from paforge.protocol import serve_lines

        def handle(tokens):
            if tokens[0] == "D":
                return "0.75"
            if tokens[0] == "C":
                return "0.2 0.8"
            raise ValueError("unknown op " + tokens[0])

        serve_lines(handle)
    """)
    comp, fg = _composite()
    scorers = SubprocessScorers(command, str(tmp_path / "work"))
    try:
        assert scorers.discriminate(comp) == 0.75
        mf = masked_foreground(fg, comp.mask)
        assert scorers.classify(mf) == [0.2, 0.8]
        suite = scorers.suite(disc_threshold=0.7)
        assert suite.discriminator == scorers.discriminate
        assert suite.disc_threshold == 0.7
    finally:
        scorers.close()


def test_subprocess_scorers_send_documented_token_counts(tmp_path):
    command = _spawn(tmp_path, """
        from paforge.protocol import serve_lines

        def handle(tokens):
            if tokens[0] == "D":
                return str(float(len(tokens)))
            return str(float(len(tokens)))

        serve_lines(handle)
    """)
    comp, fg = _composite()
    scorers = SubprocessScorers(command, str(tmp_path / "work"))
    try:
        # D <composite> <mask> <fg_source>
        assert scorers.discriminate(comp) == 4.0
        # C <masked_fg> <mask> <video_id> <index> <x> <y>
        assert scorers.classify(masked_foreground(fg, comp.mask)) == [7.0]
    finally:
        scorers.close()


def test_subprocess_scorers_reject_unparsable_answers(tmp_path):
    command = _spawn(tmp_path, """
        from paforge.protocol import serve_lines
        serve_lines(lambda toks: "not-a-number")
    """)
    comp, fg = _composite()
    scorers = SubprocessScorers(command, str(tmp_path / "work"))
    try:
        with pytest.raises(ScorerError, match="expected a float"):
            scorers.discriminate(comp)
        with pytest.raises(ScorerError, match="expected floats"):
            scorers.classify(masked_foreground(fg, comp.mask))
    finally:
        scorers.close()


MODEL_SERVER = """
    import json
    from paforge.fileio import load_manifest, load_mask, save_mask
    from paforge.protocol import serve_lines

    def handle(tokens):
        op = tokens[0]
        if op == "T":
            manifest, state_in, state_out = tokens[1], tokens[2], tokens[3]
            if state_in == "-":
                epoch = 0
            else:
                with open(state_in) as fh:
                    epoch = json.load(fh)["epoch"] + 1
            rows = len(load_manifest(manifest, check_paths=False))
            with open(state_out, "w") as fh:
                json.dump({"epoch": epoch, "rows": rows}, fh)
            return state_out
        if op == "P":
            state, frame, pa, out = tokens[1], tokens[2], tokens[3], tokens[4]
            save_mask(load_mask(pa), out)
            return out
        raise ValueError("bad op " + op)

    serve_lines(handle)
"""


def _records(n=3):
    sp = grid_superpixels(16, 4)
    rows = []
    for i in range(n):
        bits = np.zeros((16, 16), dtype=bool)
        bits[0:8, 0:4 * (i + 1)] = True
        rows.append(FrameRecord(
            ref=FrameRef("vid", i),
            image=RgbImage(np.full((16, 16, 3), 30 + i, dtype=np.uint8)),
            superpixels=sp, pa=BinaryMask(bits),
        ))
    return rows


def test_subprocess_model_train_and_predict(tmp_path):
    command = _spawn(tmp_path, MODEL_SERVER)
    rows = _records()
    model = SubprocessModel(command, str(tmp_path / "work"))
    try:
        handle = model.train(None, rows)
        with open(handle) as fh:
            state = json.load(fh)
        assert state == {"epoch": 0, "rows": 3}

        handle2 = model.train(handle, rows[:2])
        with open(handle2) as fh:
            state = json.load(fh)
        assert state == {"epoch": 1, "rows": 2}
        assert handle2 != handle

        pred = model.predict(handle2, rows[1])
        assert pred == rows[1].pa
    finally:
        model.close()


def test_subprocess_model_requires_real_state_path(tmp_path):
    command = _spawn(tmp_path, """
        from paforge.protocol import serve_lines
        serve_lines(lambda toks: "/nonexistent/state.json")
    """)
    model = SubprocessModel(command, str(tmp_path / "work"))
    try:
        with pytest.raises(ContractViolationError, match="does not exist"):
            model.train(None, _records(1))
    finally:
        model.close()
