"""On-disk formats: WSTF tensors, strict mask PNGs, dataset manifests.

WSTF layout (little-endian throughout):
    bytes 0..3   magic "WSTF"
    byte  4      format version, currently 1
    byte  5      rank r in 1..4
    next 4*r     extents as uint32
    rest         float32 payload, row-major, exactly prod(extents) values

Masks are single-channel 8-bit PNGs holding only 0 and 255.  Manifests are
whitespace-separated text: video_id frame_index frame_path [pa_path [label]],
with "-" as the placeholder for a missing pa_path.
"""

import os
import struct
from dataclasses import dataclass

import numpy as np
from PIL import Image

from .attention import Tensor
from .errors import (
    BadMagicError,
    ManifestError,
    MaskFormatError,
    RankRangeError,
    TensorFormatError,
    TrailingDataError,
    TruncatedPayloadError,
    UnsupportedVersionError,
)
from .rasters import BinaryMask, RgbImage

WSTF_MAGIC = b"WSTF"
WSTF_VERSION = 1


def save_tensor(tensor, path):
    """Write a Tensor to a WSTF file (payload stored as float32)."""
    data = np.ascontiguousarray(tensor.data, dtype="<f4")
    with open(path, "wb") as fh:
        fh.write(WSTF_MAGIC)
        fh.write(bytes([WSTF_VERSION, tensor.rank]))
        fh.write(struct.pack(f"<{tensor.rank}I", *tensor.dims))
        fh.write(data.tobytes())


def load_tensor(path):
    """Read a WSTF file into a float32 Tensor.

    Raises a distinct TensorFormatError subclass per malformation: bad magic,
    unsupported version, rank outside 1..4, truncated payload, trailing bytes.
    """
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4 or blob[:4] != WSTF_MAGIC:
        raise BadMagicError(
            f"{path}: not a WSTF tensor (got leading bytes {blob[:4]!r})"
        )
    if len(blob) < 6:
        raise TruncatedPayloadError(f"{path}: header ends after {len(blob)} bytes")
    version = blob[4]
    if version != WSTF_VERSION:
        raise UnsupportedVersionError(
            f"{path}: format version {version}, expected {WSTF_VERSION}"
        )
    rank = blob[5]
    if not (1 <= rank <= 4):
        raise RankRangeError(f"{path}: rank {rank} outside 1..4")
    dims_end = 6 + 4 * rank
    if len(blob) < dims_end:
        raise TruncatedPayloadError(
            f"{path}: file ends inside the extents block"
        )
    dims = struct.unpack(f"<{rank}I", blob[6:dims_end])
    if any(d < 1 for d in dims):
        raise TensorFormatError(f"{path}: zero extent in dims {dims}")
    count = 1
    for d in dims:
        count *= d
    expected = dims_end + 4 * count
    if len(blob) < expected:
        raise TruncatedPayloadError(
            f"{path}: payload holds {(len(blob) - dims_end) // 4} of "
            f"{count} values"
        )
    if len(blob) > expected:
        raise TrailingDataError(
            f"{path}: {len(blob) - expected} bytes beyond the declared payload"
        )
    values = np.frombuffer(blob, dtype="<f4", offset=dims_end).reshape(dims)
    return Tensor(values.astype(np.float32))


def save_mask(mask, path):
    """Write a BinaryMask as a strict 0/255 single-channel PNG."""
    arr = np.where(mask.bits, 255, 0).astype(np.uint8)
    Image.fromarray(arr, mode="L").save(path, format="PNG")


def load_mask(path):
    """Read a strict mask PNG.

    Raises MaskFormatError when the image is not single-channel 8-bit or
    holds any value besides 0 and 255, naming the first offending pixel.
    """
    with Image.open(path) as img:
        if img.mode != "L":
            raise MaskFormatError(
                f"{path}: mode {img.mode!r}, expected single-channel 8-bit 'L'"
            )
        arr = np.asarray(img)
    bad = (arr != 0) & (arr != 255)
    if bad.any():
        flat = int(np.argmax(bad))
        y, x = divmod(flat, arr.shape[1])
        raise MaskFormatError(
            f"{path}: pixel value {int(arr[y, x])} at (x={x}, y={y}), "
            f"masks must hold only 0 and 255"
        )
    return BinaryMask(arr == 255)


def save_image(image, path):
    """Write an RgbImage as PNG."""
    Image.fromarray(image.pixels, mode="RGB").save(path, format="PNG")


def load_image(path):
    """Read an image file as RgbImage (converted to RGB if needed)."""
    with Image.open(path) as img:
        rgb = img.convert("RGB")
        return RgbImage(np.asarray(rgb))


@dataclass(frozen=True)
class ManifestEntry:
    """One dataset row; paths are kept exactly as written in the file."""

    video_id: str
    frame_index: int
    frame_path: str
    pa_path: str = None
    label: str = None


def load_manifest(path, check_paths=True):
    """Parse a manifest file into ManifestEntry rows.

    Args:
        path: manifest file location.
        check_paths: verify that referenced frame/pa files exist, resolved
            relative to the manifest's directory.

    Returns:
        List of entries in file order.

    Raises:
        ManifestError: malformed line, duplicate (video_id, frame_index),
            or (with check_paths) a missing referenced file; messages carry
            the 1-based line number.
    """
    base = os.path.dirname(os.path.abspath(path))
    entries = []
    seen = {}
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue
            tokens = line.split()
            if not (3 <= len(tokens) <= 5):
                raise ManifestError(
                    f"{path}:{lineno}: expected 3 to 5 fields, got {len(tokens)}"
                )
            video_id = tokens[0]
            try:
                frame_index = int(tokens[1])
            except ValueError:
                raise ManifestError(
                    f"{path}:{lineno}: frame_index {tokens[1]!r} is not an integer"
                ) from None
            if frame_index < 0:
                raise ManifestError(
                    f"{path}:{lineno}: frame_index must be >= 0, got {frame_index}"
                )
            key = (video_id, frame_index)
            if key in seen:
                raise ManifestError(
                    f"{path}:{lineno}: duplicate frame {video_id}/{frame_index}, "
                    f"first seen on line {seen[key]}"
                )
            seen[key] = lineno
            frame_path = tokens[2]
            pa_path = tokens[3] if len(tokens) >= 4 else None
            if pa_path == "-":
                pa_path = None
            label = tokens[4] if len(tokens) == 5 else None
            if check_paths:
                for what, p in (("frame", frame_path), ("pa", pa_path)):
                    if p is None:
                        continue
                    resolved = p if os.path.isabs(p) else os.path.join(base, p)
                    if not os.path.exists(resolved):
                        raise ManifestError(
                            f"{path}:{lineno}: {what} file not found: {p}"
                        )
            entries.append(ManifestEntry(
                video_id=video_id, frame_index=frame_index,
                frame_path=frame_path, pa_path=pa_path, label=label,
            ))
    return entries


def save_manifest(entries, path):
    """Write entries back out; "-" stands in for a missing pa_path when a
    label follows it."""
    with open(path, "w", encoding="utf-8") as fh:
        for e in entries:
            tokens = [e.video_id, str(e.frame_index), e.frame_path]
            if e.pa_path is not None:
                tokens.append(e.pa_path)
            elif e.label is not None:
                tokens.append("-")
            if e.label is not None:
                tokens.append(e.label)
            fh.write(" ".join(tokens) + "\n")


def resolve_manifest_path(manifest_path, entry_path):
    """Resolve a manifest-relative path against the manifest location."""
    if os.path.isabs(entry_path):
        return entry_path
    return os.path.join(os.path.dirname(os.path.abspath(manifest_path)), entry_path)
