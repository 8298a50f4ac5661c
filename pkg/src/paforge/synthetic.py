"""Deterministic synthetic worlds for tests, demos and reference servers.

A blob world is a set of tiny videos over a cell grid: each video has a flat
background color and one bright 2x2-cell actor blob; the hidden ground truth
is the blob.  Initial pseudo-annotations are corrupted with extra background
cells (either scattered single cells or isolated 2x2 blocks), which the
evolution loop is supposed to shed.

Everything here is seeded and reproducible: same arguments, same world.
"""

import math
import random
from dataclasses import dataclass

import numpy as np

from .rasters import BinaryMask, RgbImage, SuperpixelMap
from .selection import FrameRef


@dataclass(frozen=True)
class WorldFrame:
    ref: FrameRef
    image: RgbImage
    gt: BinaryMask
    initial_pa: BinaryMask
    corrupt_cells: tuple


@dataclass(frozen=True)
class BlobWorld:
    size: int
    cell: int
    frames: tuple
    gt: dict
    gt_cell_origin: dict

    @property
    def cells_per_side(self):
        return self.size // self.cell


def grid_superpixels(size, cell):
    """Regular square-tile SuperpixelMap; cell must divide size."""
    if size % cell != 0:
        raise ValueError(f"cell {cell} must divide size {size}")
    per = size // cell
    ys, xs = np.mgrid[0:size, 0:size]
    labels = (ys // cell) * per + (xs // cell)
    return SuperpixelMap(labels=labels.astype(np.int32), region_count=per * per)


def _cell_mask(size, cell, cells):
    bits = np.zeros((size, size), dtype=bool)
    per = size // cell
    for c in cells:
        cy, cx = divmod(c, per)
        bits[cy * cell:(cy + 1) * cell, cx * cell:(cx + 1) * cell] = True
    return BinaryMask(bits)


def build_blob_world(n_videos=20, frames_per_video=8, size=64, cell=8,
                     corrupt_cells=32, corrupt_blocks=0, seed=7):
    """Build a blob world.

    Args:
        corrupt_cells: scattered single corrupted cells per frame (may touch
            each other and the blob).
        corrupt_blocks: isolated 2x2-cell corrupted blocks per frame, placed
            so no block touches another block or the blob, even diagonally.
        seed: RNG seed for colors, blob placement and corruption.

    Returns:
        BlobWorld.
    """
    if size % cell != 0:
        raise ValueError(f"cell {cell} must divide size {size}")
    per = size // cell
    if per < 4:
        raise ValueError(f"need at least a 4x4 cell grid, got {per}x{per}")
    rng = random.Random(seed)
    frames = []
    gt_by_ref = {}
    origin_by_vid = {}
    for v in range(n_videos):
        vid = f"video{v:03d}"
        bg = tuple(rng.randrange(30, 91) for _ in range(3))
        fg = tuple(rng.randrange(150, 241) for _ in range(3))
        bx = rng.randrange(per - 1)
        by = rng.randrange(per - 1)
        origin_by_vid[vid] = (bx, by)
        blob_cells = {
            (by + dy) * per + (bx + dx) for dy in (0, 1) for dx in (0, 1)
        }
        img = np.empty((size, size, 3), dtype=np.uint8)
        img[:, :] = bg
        gt_mask = _cell_mask(size, cell, blob_cells)
        img[gt_mask.bits] = fg
        image = RgbImage(img)

        blocked = _grow(blob_cells, per)
        free_cells = [c for c in range(per * per) if c not in blob_cells]
        for f in range(frames_per_video):
            ref = FrameRef(video_id=vid, frame_index=f)
            corrupt = []
            if corrupt_cells:
                corrupt = rng.sample(free_cells, corrupt_cells)
            if corrupt_blocks:
                corrupt = corrupt + _sample_blocks(
                    rng, per, blocked, corrupt_blocks
                )
            pa = _cell_mask(size, cell, blob_cells.union(corrupt))
            frames.append(WorldFrame(
                ref=ref, image=image, gt=gt_mask, initial_pa=pa,
                corrupt_cells=tuple(sorted(corrupt)),
            ))
            gt_by_ref[ref] = gt_mask
    return BlobWorld(size=size, cell=cell, frames=tuple(frames),
                     gt=gt_by_ref, gt_cell_origin=origin_by_vid)


def _grow(cells, per):
    """Cells plus their 8-neighborhood."""
    out = set()
    for c in cells:
        cy, cx = divmod(c, per)
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                ny, nx = cy + dy, cx + dx
                if 0 <= ny < per and 0 <= nx < per:
                    out.add(ny * per + nx)
    return out


def _sample_blocks(rng, per, blocked, count):
    """Place non-touching 2x2 blocks avoiding the blocked set."""
    taken = set(blocked)
    cells = []
    placed = 0
    tries = 0
    while placed < count:
        tries += 1
        if tries > 10000:
            raise RuntimeError(
                f"could not place {count} isolated blocks on a {per}x{per} grid"
            )
        bx = rng.randrange(per - 1)
        by = rng.randrange(per - 1)
        block = {(by + dy) * per + (bx + dx) for dy in (0, 1) for dx in (0, 1)}
        if block & taken:
            continue
        cells.extend(sorted(block))
        taken |= _grow(block, per)
        placed += 1
    return cells


def make_records(world, val_stride=4):
    """FrameRecords over a world: grid superpixels, initial annotations.

    Every val_stride-th frame position of each video (the last of each
    stride group) becomes a validation row.
    """
    from .evolution import FrameRecord

    if val_stride < 2:
        raise ValueError(f"val_stride must be >= 2, got {val_stride}")
    sp = grid_superpixels(world.size, world.cell)
    records = []
    for wf in world.frames:
        records.append(FrameRecord(
            ref=wf.ref, image=wf.image, superpixels=sp, pa=wf.initial_pa,
            validation=(wf.ref.frame_index % val_stride == val_stride - 1),
        ))
    return records


class StubTrainer:
    """Model handle is simply the epoch counter."""

    def __call__(self, handle, selected_records):
        return 0 if handle is None else handle + 1


class StubPredictor:
    """Label-free stand-in for a segmentation network.

    Each call inspects the frame's current annotation, finds the cells that
    are annotated but miss the hidden blob, and predicts the annotation with
    a quarter of those error cells removed.  Early epochs additionally leak
    small junk speckles into clean cells (junk0 - junk_step * epoch of them),
    which superpixel refinement wipes out; they only depress the integrity
    term, giving each epoch trace a rising then flat shape.
    """

    def __init__(self, world, removal_fraction=0.25, junk0=6, junk_step=2,
                 junk_size=4):
        self.world = world
        self.removal_fraction = removal_fraction
        self.junk0 = junk0
        self.junk_step = junk_step
        self.junk_size = junk_size

    def __call__(self, handle, record):
        epoch = int(handle)
        world = self.world
        cell = world.cell
        per = world.cells_per_side
        gt = world.gt[record.ref].bits
        pa = record.pa.bits
        err = []
        clean = []
        for c in range(per * per):
            cy, cx = divmod(c, per)
            sl = (slice(cy * cell, (cy + 1) * cell),
                  slice(cx * cell, (cx + 1) * cell))
            in_gt = gt[sl].any()
            if pa[sl].all() and not in_gt:
                err.append(sl)
            elif not pa[sl].any() and not in_gt:
                clean.append(sl)
        remove = err[:int(len(err) * self.removal_fraction)]
        junk_count = max(0, self.junk0 - self.junk_step * epoch)
        out = pa.copy()
        for sl in remove:
            out[sl] = False
        for sl in clean[:junk_count]:
            y0 = sl[0].start + 2
            x0 = sl[1].start + 2
            out[y0:y0 + self.junk_size, x0:x0 + self.junk_size] = True
        return BinaryMask(out)


def contract_toward(pa, gt, fraction=0.5):
    """One reference-model prediction step on mask arrays.

    Removes ceil(fraction * n) of the false-positive components of pa (those
    disjoint from gt) and fills the same share of false-negative components,
    both in row-major first-pixel order.  This is the arithmetic behind the
    reference model server.
    """
    from scipy import ndimage

    eight = np.ones((3, 3), dtype=bool)
    out = pa.bits.copy()
    fp = pa.bits & ~gt.bits
    fn = gt.bits & ~pa.bits
    for err, value in ((fp, False), (fn, True)):
        cc, n = ndimage.label(err, structure=eight)
        if n == 0:
            continue
        fix = math.ceil(fraction * n)
        for i in range(1, fix + 1):
            out[cc == i] = value
    return BinaryMask(out)
