"""SLIC superpixel segmentation.

Hand-rolled k-means-over-(Lab, xy) with the classic recipe: seeds on a regular
grid of spacing S = sqrt(N / k), each seed nudged to the lowest-gradient pixel
in its 3x3 neighborhood, then up to max_iters rounds of windowed assignment
(2S x 2S around each center) under the distance

    D = sqrt(d_color^2 + (d_xy / S)^2 * m^2)

with d_color measured in CIELAB (D65 white point) and m the compactness,
followed by mean updates.  Optional connectivity enforcement absorbs fragments
smaller than S^2 / 4 into the neighbor sharing the longest boundary.

Every tie-break is pinned (lowest index wins, row-major scan order) so a given
input and parameter set always yields the identical label map.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import ndimage
from sklearn.base import BaseEstimator

from ._validation import as_rgb_image, check_positive_int
from .rasters import SuperpixelMap

_FOUR_CONN = np.array([[0, 1, 0], [1, 1, 1], [0, 1, 0]], dtype=bool)

# sRGB (linear) -> XYZ, D65 reference white.
_RGB_TO_XYZ = np.array(
    [
        [0.4124564, 0.3575761, 0.1804375],
        [0.2126729, 0.7151522, 0.0721750],
        [0.0193339, 0.1191920, 0.9503041],
    ]
)
_WHITE = np.array([0.95047, 1.0, 1.08883])


@dataclass(frozen=True)
class SlicParams:
    """Knobs for slic().

    k: target region count; actual count lands in [1, 2k].
    compactness: weight m trading color distance against spatial distance.
    max_iters: assignment/update rounds.
    enforce_connectivity: absorb small disconnected fragments afterwards.
    """

    k: int = 400
    compactness: float = 10.0
    max_iters: int = 10
    enforce_connectivity: bool = True

    def __post_init__(self):
        check_positive_int(self.k, "k")
        check_positive_int(self.max_iters, "max_iters")
        if not (float(self.compactness) > 0):
            raise ValueError(f"compactness must be > 0, got {self.compactness}")


def rgb_to_lab(image):
    """Convert an RgbImage (or uint8 array) to CIELAB, D65 white point."""
    image = as_rgb_image(image)
    srgb = image.pixels.astype(np.float64) / 255.0
    linear = np.where(
        srgb <= 0.04045, srgb / 12.92, ((srgb + 0.055) / 1.055) ** 2.4
    )
    xyz = linear @ _RGB_TO_XYZ.T
    ratio = xyz / _WHITE
    eps = (6.0 / 29.0) ** 3
    f = np.where(
        ratio > eps,
        np.cbrt(ratio),
        ratio / (3.0 * (6.0 / 29.0) ** 2) + 4.0 / 29.0,
    )
    lab = np.empty_like(f)
    lab[..., 0] = 116.0 * f[..., 1] - 16.0
    lab[..., 1] = 500.0 * (f[..., 0] - f[..., 1])
    lab[..., 2] = 200.0 * (f[..., 1] - f[..., 2])
    return lab


def _gradient_energy(lab):
    h, w = lab.shape[:2]
    xs = np.arange(w)
    ys = np.arange(h)
    dx = lab[:, np.minimum(xs + 1, w - 1), :] - lab[:, np.maximum(xs - 1, 0), :]
    dy = lab[np.minimum(ys + 1, h - 1), :, :] - lab[np.maximum(ys - 1, 0), :, :]
    return (dx**2).sum(axis=2) + (dy**2).sum(axis=2)


def _seed_grid(w, h, k):
    s = math.sqrt(w * h / k)
    nx = max(1, round(w / s))
    ny = max(1, round(h / s))
    # round() can land the seed count outside [k, 2k]; nudge the grid back.
    while nx * ny < k and (nx < w or ny < h):
        if ny >= h or (nx < w and w / nx >= h / ny):
            nx += 1
        else:
            ny += 1
    while nx * ny > 2 * k:
        if nx >= ny and nx > 1:
            nx -= 1
        elif ny > 1:
            ny -= 1
        else:
            nx -= 1
    xs = [((2 * i + 1) * w - nx) // (2 * nx) for i in range(nx)]
    ys = [((2 * j + 1) * h - ny) // (2 * ny) for j in range(ny)]
    return [(x, y) for y in ys for x in xs], s


def _perturb_seeds(seeds, grad):
    h, w = grad.shape
    occupied = set(seeds)
    out = []
    for x, y in seeds:
        occupied.discard((x, y))
        best = (grad[y, x], 0, 0)
        best_pos = (x, y)
        idx = 0
        for dy in (-1, 0, 1):
            for dx in (-1, 0, 1):
                nx, ny = x + dx, y + dy
                idx += 1
                if nx < 0 or ny < 0 or nx >= w or ny >= h:
                    continue
                if (nx, ny) == (x, y):
                    continue
                if (nx, ny) in occupied:
                    continue
                cand = (grad[ny, nx], 1, idx)
                if cand < best:
                    best = cand
                    best_pos = (nx, ny)
        occupied.add(best_pos)
        out.append(best_pos)
    return out


def _assign(lab, centers, s, m, xs_grid, ys_grid):
    h, w = lab.shape[:2]
    dist = np.full((h, w), np.inf)
    label = np.full((h, w), -1, dtype=np.int32)
    m2_over_s2 = (m * m) / (s * s)
    for ci in range(centers.shape[0]):
        cl = centers[ci, :3]
        cx = centers[ci, 3]
        cy = centers[ci, 4]
        x0 = max(0, int(math.floor(cx - s)))
        x1 = min(w, int(math.floor(cx + s)) + 1)
        y0 = max(0, int(math.floor(cy - s)))
        y1 = min(h, int(math.floor(cy + s)) + 1)
        if x0 >= x1 or y0 >= y1:
            continue
        sub = lab[y0:y1, x0:x1, :]
        dc2 = ((sub - cl) ** 2).sum(axis=2)
        dxy2 = (xs_grid[y0:y1, x0:x1] - cx) ** 2 + (ys_grid[y0:y1, x0:x1] - cy) ** 2
        d = np.sqrt(dc2 + dxy2 * m2_over_s2)
        win = d < dist[y0:y1, x0:x1]
        dist[y0:y1, x0:x1][win] = d[win]
        label[y0:y1, x0:x1][win] = ci
    orphan_rows, orphan_cols = np.nonzero(label < 0)
    for y, x in zip(orphan_rows, orphan_cols):
        dc2 = ((centers[:, :3] - lab[y, x, :]) ** 2).sum(axis=1)
        dxy2 = (centers[:, 3] - x) ** 2 + (centers[:, 4] - y) ** 2
        label[y, x] = int(np.argmin(np.sqrt(dc2 + dxy2 * m2_over_s2)))
    return label


def _update(lab, label, centers, xs_grid, ys_grid):
    n = centers.shape[0]
    flat = label.ravel()
    counts = np.bincount(flat, minlength=n).astype(np.float64)
    new = centers.copy()
    nonempty = counts > 0
    for ch in range(3):
        sums = np.bincount(flat, weights=lab[..., ch].ravel(), minlength=n)
        new[nonempty, ch] = sums[nonempty] / counts[nonempty]
    sx = np.bincount(flat, weights=xs_grid.ravel(), minlength=n)
    sy = np.bincount(flat, weights=ys_grid.ravel(), minlength=n)
    new[nonempty, 3] = sx[nonempty] / counts[nonempty]
    new[nonempty, 4] = sy[nonempty] / counts[nonempty]
    return new


def _components(label):
    """4-connected components of equal-label runs, ids in scan order."""
    h, w = label.shape
    comp = np.full((h, w), -1, dtype=np.int64)
    next_id = 0
    for lab_val in np.unique(label):
        mask = label == lab_val
        cc, n = ndimage.label(mask, structure=_FOUR_CONN)
        comp[mask] = cc[mask] - 1 + next_id
        next_id += n
    return comp, next_id


def _adjacency(comp, ncomp):
    pairs = []
    a, b = comp[:, :-1].ravel(), comp[:, 1:].ravel()
    sel = a != b
    pairs.append(np.stack([a[sel], b[sel]], axis=1))
    a, b = comp[:-1, :].ravel(), comp[1:, :].ravel()
    sel = a != b
    pairs.append(np.stack([a[sel], b[sel]], axis=1))
    allp = np.concatenate(pairs, axis=0)
    if allp.size == 0:
        return {}
    lo = allp.min(axis=1)
    hi = allp.max(axis=1)
    enc = lo * ncomp + hi
    uniq, counts = np.unique(enc, return_counts=True)
    adj = {}
    for code, cnt in zip(uniq, counts):
        p, q = int(code // ncomp), int(code % ncomp)
        adj.setdefault(p, []).append((q, int(cnt)))
        adj.setdefault(q, []).append((p, int(cnt)))
    return adj


def _relabel_contiguous(label):
    flat = label.ravel()
    uniq, first = np.unique(flat, return_index=True)
    order = np.argsort(first, kind="stable")
    lut = np.empty(int(uniq.max()) + 1, dtype=np.int32)
    lut[uniq[order]] = np.arange(uniq.size, dtype=np.int32)
    return lut[label], int(uniq.size)


def _enforce_connectivity(label, s, k):
    min_size = (s * s) / 4.0
    while True:
        comp, ncomp = _components(label)
        # From here on regions are the components themselves; a cluster
        # fragmented into several large pieces must not survive as one label.
        label = comp
        if ncomp == 1:
            break
        areas = np.bincount(comp.ravel(), minlength=ncomp)
        smalls = [c for c in range(ncomp) if areas[c] < min_size]
        if not smalls and ncomp <= 2 * k:
            break
        if not smalls:
            extra = ncomp - 2 * k
            by_size = sorted(range(ncomp), key=lambda c: (areas[c], c))
            smalls = by_size[:extra]
        adj = _adjacency(comp, ncomp)
        parent = list(range(ncomp))

        def find(c):
            while parent[c] != c:
                parent[c] = parent[parent[c]]
                c = parent[c]
            return c

        for c in sorted(smalls, key=lambda c: (areas[c], c)):
            neighbors = adj.get(c)
            if not neighbors:
                continue
            target = min(neighbors, key=lambda nc: (-nc[1], nc[0]))[0]
            rc, rt = find(c), find(target)
            if rc != rt:
                parent[rc] = rt
        # Each merged group becomes its own region: reusing original cluster
        # labels here could leave two far-apart groups sharing one label.
        roots = np.fromiter((find(c) for c in range(ncomp)), dtype=np.int64)
        label = roots[comp]
    return label


def slic(image, params=None):
    """Segment an image into superpixels.

    Args:
        image: RgbImage (or (h, w, 3) uint8 array).
        params: SlicParams; defaults apply when omitted.

    Returns:
        SuperpixelMap with contiguous labels in row-major first-touch order
        and region_count in [1, 2k].

    Raises:
        ValueError: if k exceeds the pixel count.
    """
    image = as_rgb_image(image)
    if params is None:
        params = SlicParams()
    h, w = image.height, image.width
    if params.k > h * w:
        raise ValueError(
            f"k={params.k} exceeds the pixel count {h * w} of a {w}x{h} image"
        )
    lab = rgb_to_lab(image)
    seeds, s = _seed_grid(w, h, params.k)
    seeds = _perturb_seeds(seeds, _gradient_energy(lab))

    centers = np.empty((len(seeds), 5), dtype=np.float64)
    for i, (x, y) in enumerate(seeds):
        centers[i, :3] = lab[y, x, :]
        centers[i, 3] = x
        centers[i, 4] = y

    ys_grid, xs_grid = np.mgrid[0:h, 0:w].astype(np.float64)
    label = None
    for _ in range(params.max_iters):
        label = _assign(lab, centers, s, params.compactness, xs_grid, ys_grid)
        centers = _update(lab, label, centers, xs_grid, ys_grid)

    if params.enforce_connectivity:
        label = _enforce_connectivity(label, s, params.k)
    label, count = _relabel_contiguous(label)
    return SuperpixelMap(labels=label, region_count=count)


class SlicSuperpixels(BaseEstimator):
    """Estimator wrapper around slic(), clusterer-style.

    fit() segments the image; fit_predict() returns the SuperpixelMap.
    """

    def __init__(self, n_segments=400, compactness=10.0, max_iters=10,
                 enforce_connectivity=True):
        self.n_segments = n_segments
        self.compactness = compactness
        self.max_iters = max_iters
        self.enforce_connectivity = enforce_connectivity

    def _params(self):
        return SlicParams(
            k=self.n_segments,
            compactness=self.compactness,
            max_iters=self.max_iters,
            enforce_connectivity=self.enforce_connectivity,
        )

    def fit(self, X, y=None):
        sp = slic(X, self._params())
        self.superpixels_ = sp
        self.labels_ = sp.labels
        self.n_regions_ = sp.region_count
        return self

    def fit_predict(self, X, y=None):
        return self.fit(X).superpixels_
