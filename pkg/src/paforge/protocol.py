"""Newline-delimited subprocess protocol for out-of-process scorers/models.

Requests and responses are single text lines over stdin/stdout; anything
binary travels by file path.  The wire vocabulary:

    scorer server
        D <composite_png> <mask_png> <fg_source_png>          -> score in [0, 1]
        C <masked_fg_png> <mask_png> <video_id> <index> <x> <y> -> p0 p1 ...

    model server
        T <selected_manifest> <state_in|-> <state_out>    -> state_out path
        P <state> <frame_png> <pa_png> <out_mask_png>     -> out_mask path

Servers may log freely on stderr; stdout carries exactly one response line
per request.  A server that cannot satisfy a request answers a line starting
with "ERR ".
"""

import os
import shlex
import subprocess
import sys

from .errors import ContractViolationError, ScorerError
from .fileio import load_mask, save_image, save_manifest, save_mask
from .selection import ScorerSuite

ERR_PREFIX = "ERR "


class LineProtocolClient:
    """Drives one child process speaking the line protocol."""

    def __init__(self, command):
        if isinstance(command, str):
            command = shlex.split(command)
        self.command = list(command)
        self.proc = subprocess.Popen(
            self.command,
            stdin=subprocess.PIPE,
            stdout=subprocess.PIPE,
            stderr=None,
            text=True,
            bufsize=1,
        )

    def request(self, line):
        """Send one request line, return the stripped response line."""
        if self.proc.poll() is not None:
            raise ScorerError(
                f"subprocess {self.command[0]} exited with code "
                f"{self.proc.returncode} before the request"
            )
        try:
            self.proc.stdin.write(line.rstrip("\n") + "\n")
            self.proc.stdin.flush()
            response = self.proc.stdout.readline()
        except (BrokenPipeError, OSError) as exc:
            raise ScorerError(
                f"subprocess {self.command[0]} pipe failed: {exc}"
            ) from exc
        if response == "":
            code = self.proc.poll()
            raise ScorerError(
                f"subprocess {self.command[0]} closed stdout "
                f"(exit code {code}) instead of answering"
            )
        response = response.strip()
        if response.startswith(ERR_PREFIX):
            raise ScorerError(
                f"subprocess {self.command[0]} answered: "
                f"{response[len(ERR_PREFIX):]}"
            )
        return response

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
            except OSError:
                pass
            try:
                self.proc.wait(timeout=10)
            except subprocess.TimeoutExpired:
                self.proc.kill()
                self.proc.wait()

    def __enter__(self):
        return self

    def __exit__(self, *exc_info):
        self.close()


class SubprocessScorers:
    """ScorerSuite backed by one scorer server subprocess.

    Patches are serialized into workdir; file names are reused across calls,
    so the directory stays small.
    """

    def __init__(self, command, workdir):
        os.makedirs(workdir, exist_ok=True)
        self.workdir = workdir
        self.client = LineProtocolClient(command)

    def _path(self, name):
        return os.path.join(self.workdir, name)

    def discriminate(self, composite):
        comp_path = self._path("composite.png")
        mask_path = self._path("composite_mask.png")
        src_path = self._path("fg_source.png")
        save_image(composite.image, comp_path)
        save_mask(composite.mask, mask_path)
        save_image(composite.fg_origin.pixels, src_path)
        answer = self.client.request(f"D {comp_path} {mask_path} {src_path}")
        try:
            return float(answer)
        except ValueError:
            raise ScorerError(
                f"discriminator answered {answer!r}, expected a float"
            ) from None

    def classify(self, mf):
        fg_path = self._path("masked_fg.png")
        mask_path = self._path("fg_mask.png")
        save_image(mf.patch.pixels, fg_path)
        save_mask(mf.mask, mask_path)
        ref = mf.patch.source
        box = mf.patch.box
        answer = self.client.request(
            f"C {fg_path} {mask_path} {ref.video_id} {ref.frame_index} "
            f"{box.x} {box.y}"
        )
        try:
            return [float(tok) for tok in answer.split()]
        except ValueError:
            raise ScorerError(
                f"classifier answered {answer!r}, expected floats"
            ) from None

    def suite(self, disc_threshold=0.5, cls_threshold=0.5, expected_class=1):
        return ScorerSuite(
            discriminator=self.discriminate,
            classifier=self.classify,
            disc_threshold=disc_threshold,
            cls_threshold=cls_threshold,
            expected_class=expected_class,
        )

    def close(self):
        self.client.close()


class SubprocessModel:
    """Trainer/predictor callbacks backed by one model server subprocess.

    The model handle is the path of a state file owned by the server; this
    side only passes it around.
    """

    def __init__(self, command, workdir):
        os.makedirs(workdir, exist_ok=True)
        self.workdir = workdir
        self.client = LineProtocolClient(command)
        self._state_seq = 0

    def _write_selected(self, records):
        sel_dir = os.path.join(self.workdir, "selected")
        os.makedirs(sel_dir, exist_ok=True)
        from .fileio import ManifestEntry

        entries = []
        for rec in records:
            stem = f"{rec.ref.video_id}_{rec.ref.frame_index:04d}"
            frame_path = os.path.join(sel_dir, stem + "_frame.png")
            pa_path = os.path.join(sel_dir, stem + "_pa.png")
            save_image(rec.image, frame_path)
            save_mask(rec.pa, pa_path)
            entries.append(ManifestEntry(
                video_id=rec.ref.video_id, frame_index=rec.ref.frame_index,
                frame_path=frame_path, pa_path=pa_path,
            ))
        manifest = os.path.join(sel_dir, "selected.txt")
        save_manifest(entries, manifest)
        return manifest

    def train(self, handle, selected_records):
        manifest = self._write_selected(selected_records)
        self._state_seq += 1
        state_out = os.path.join(self.workdir, f"state_{self._state_seq:04d}.json")
        prev = handle if handle is not None else "-"
        answer = self.client.request(f"T {manifest} {prev} {state_out}")
        if not os.path.exists(answer):
            raise ContractViolationError(
                f"model server answered state path {answer!r} which does not exist"
            )
        return answer

    def predict(self, handle, record):
        stem = f"{record.ref.video_id}_{record.ref.frame_index:04d}"
        frame_path = os.path.join(self.workdir, stem + "_frame.png")
        pa_path = os.path.join(self.workdir, stem + "_pa.png")
        out_path = os.path.join(self.workdir, stem + "_pred.png")
        save_image(record.image, frame_path)
        save_mask(record.pa, pa_path)
        answer = self.client.request(f"P {handle} {frame_path} {pa_path} {out_path}")
        return load_mask(answer)

    def close(self):
        self.client.close()


def serve_lines(handler, stdin=None, stdout=None):
    """Run a server loop: one handler call per request line.

    The handler maps a token list to a response string; exceptions become
    "ERR <message>" responses and the loop keeps serving.
    """
    stdin = stdin if stdin is not None else sys.stdin
    stdout = stdout if stdout is not None else sys.stdout
    for raw in stdin:
        line = raw.strip()
        if not line:
            continue
        try:
            response = handler(line.split())
        except Exception as exc:
            response = ERR_PREFIX + str(exc).replace("\n", " ")
        stdout.write(response + "\n")
        stdout.flush()
