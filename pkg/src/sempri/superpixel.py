"""SLIC oversegmentation with 4-connected regions.

Clustering runs in L*a*b* + xy space with a grid initialization at step
``S = sqrt(h*w / target)``; each center searches a ``2S x 2S`` window and
pixels take the center minimizing ``d_lab + (compactness / S) * d_xy``.
After the fixed iteration budget, every 4-connected component that is not
the largest piece of its cluster is merged into its largest neighbouring
region, and labels are renumbered in raster order of first appearance.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
from skimage.color import rgb2lab
from skimage.measure import label as connected_components

from .exceptions import DataError
from .validation import check_image

DEFAULT_REGIONS = 200
DEFAULT_COMPACTNESS = 10.0
DEFAULT_ITERATIONS = 10


@dataclass(frozen=True, eq=False)
class Segmentation:
    """Region index map ``labels`` (h x w, values in ``[0, n_regions)``)."""

    labels: np.ndarray
    n_regions: int

    @property
    def shape(self) -> tuple[int, int]:
        return self.labels.shape

    @cached_property
    def sizes(self) -> np.ndarray:
        return np.bincount(self.labels.ravel(), minlength=self.n_regions)

    @cached_property
    def region_pixel_lists(self) -> list[np.ndarray]:
        """Flat pixel indices of each region, in raster order."""
        flat = self.labels.ravel()
        order = np.argsort(flat, kind="stable")
        bounds = np.concatenate(([0], np.cumsum(self.sizes)))
        return [order[bounds[q] : bounds[q + 1]] for q in range(self.n_regions)]

    @classmethod
    def from_labels(cls, labels) -> Segmentation:
        """Wrap an arbitrary integer label map, renumbering to ``[0, n)`` in raster order."""
        labels = np.asarray(labels)
        if labels.ndim != 2 or labels.size == 0:
            raise DataError("label map must be a non-empty 2-D array")
        relabeled, n = _relabel_raster_order(labels)
        return cls(relabeled, n)


def _relabel_raster_order(labels: np.ndarray) -> tuple[np.ndarray, int]:
    values, first, inverse = np.unique(labels.ravel(), return_index=True, return_inverse=True)
    rank = np.empty(len(values), dtype=np.int32)
    rank[np.argsort(first, kind="stable")] = np.arange(len(values), dtype=np.int32)
    return rank[inverse].reshape(labels.shape), len(values)


def slic_segment(
    image,
    target_regions: int = DEFAULT_REGIONS,
    compactness: float = DEFAULT_COMPACTNESS,
    n_iter: int = DEFAULT_ITERATIONS,
) -> Segmentation:
    """Oversegment an RGB image into roughly ``target_regions`` connected superpixels."""
    image = check_image(image)
    h, w = image.shape[:2]
    if not 1 <= target_regions <= h * w:
        raise DataError(f"target_regions must be in [1, {h * w}], got {target_regions}")
    if compactness < 0:
        raise DataError("compactness must be non-negative")

    lab = rgb2lab(image.astype(np.float64) / 255.0)
    step = math.sqrt(h * w / target_regions)
    labels = _cluster(lab, step, target_regions, compactness, n_iter)
    labels = _enforce_connectivity(labels, min_size=0)
    relabeled, n = _relabel_raster_order(labels)
    return Segmentation(relabeled, n)


def _grid_shape(h: int, w: int, step: float, target: int) -> tuple[int, int]:
    ny = max(1, min(h, round(h / step)))
    nx = max(1, min(w, round(w / step)))
    # keep the grid at or below the requested count when rounding overshoots
    while ny * nx > target and (ny > 1 or nx > 1):
        if ny >= nx and ny > 1:
            ny -= 1
        else:
            nx -= 1
    return ny, nx


def _cluster(lab, step, target, compactness, n_iter):
    h, w = lab.shape[:2]
    ny, nx = _grid_shape(h, w, step, target)
    n = ny * nx
    c_y, c_x = np.meshgrid((np.arange(ny) + 0.5) * h / ny, (np.arange(nx) + 0.5) * w / nx, indexing="ij")
    c_y, c_x = c_y.ravel(), c_x.ravel()
    c_lab = lab[c_y.astype(int), c_x.astype(int)].copy()

    ys = np.arange(h, dtype=np.float64)[:, None]
    xs = np.arange(w, dtype=np.float64)[None, :]
    # pixels outside every search window keep their grid cell
    gy = np.arange(h) * ny // h
    gx = np.arange(w) * nx // w
    labels = (gy[:, None] * nx + gx[None, :]).astype(np.int32)

    spatial_weight = compactness / step
    radius = int(math.ceil(step))
    dist = np.empty((h, w), dtype=np.float64)
    flat_y = np.broadcast_to(ys, (h, w)).ravel()
    flat_x = np.broadcast_to(xs, (h, w)).ravel()
    flat_lab = lab.reshape(-1, 3)

    for _ in range(n_iter):
        dist.fill(np.inf)
        for k in range(n):
            y0 = max(0, int(c_y[k]) - radius)
            y1 = min(h, int(c_y[k]) + radius + 1)
            x0 = max(0, int(c_x[k]) - radius)
            x1 = min(w, int(c_x[k]) + radius + 1)
            if y0 >= y1 or x0 >= x1:
                continue
            win = lab[y0:y1, x0:x1]
            d_lab = np.sqrt(np.sum((win - c_lab[k]) ** 2, axis=2))
            d_xy = np.sqrt((ys[y0:y1] - c_y[k]) ** 2 + (xs[:, x0:x1] - c_x[k]) ** 2)
            d = d_lab + spatial_weight * d_xy
            sub = dist[y0:y1, x0:x1]
            closer = d < sub
            sub[closer] = d[closer]
            labels[y0:y1, x0:x1][closer] = k

        flat = labels.ravel()
        counts = np.bincount(flat, minlength=n).astype(np.float64)
        live = counts > 0
        for arr, values in ((c_y, flat_y), (c_x, flat_x)):
            sums = np.bincount(flat, weights=values, minlength=n)
            arr[live] = sums[live] / counts[live]
        for ch in range(3):
            sums = np.bincount(flat, weights=flat_lab[:, ch], minlength=n)
            c_lab[live, ch] = sums[live] / counts[live]
    return labels


def _component_adjacency(comp: np.ndarray) -> np.ndarray:
    """Unique unordered pairs (a, b), a < b, of 4-adjacent distinct labels."""
    pairs = []
    for a, b in ((comp[:, :-1], comp[:, 1:]), (comp[:-1, :], comp[1:, :])):
        diff = a != b
        if np.any(diff):
            pa, pb = a[diff], b[diff]
            pairs.append(np.stack([np.minimum(pa, pb), np.maximum(pa, pb)], axis=1))
    if not pairs:
        return np.empty((0, 2), dtype=np.int64)
    return np.unique(np.concatenate(pairs), axis=0)


def _enforce_connectivity(labels: np.ndarray, min_size: int = 0) -> np.ndarray:
    comp = connected_components(labels + 1, connectivity=1, background=0) - 1
    n_comp = int(comp.max()) + 1
    size = np.bincount(comp.ravel(), minlength=n_comp)
    # cluster id of each component (any pixel of the component will do)
    owner = np.empty(n_comp, dtype=np.int64)
    owner[comp.ravel()] = labels.ravel()

    # largest component of each cluster survives; ties go to the lowest component id
    order = np.lexsort((np.arange(n_comp), -size, owner))
    keep = np.zeros(n_comp, dtype=bool)
    first_of_owner = np.ones(n_comp, dtype=bool)
    first_of_owner[1:] = owner[order][1:] != owner[order][:-1]
    keep[order[first_of_owner]] = True
    keep &= size >= min_size
    if keep.all():
        return comp

    neighbours: list[set[int]] = [set() for _ in range(n_comp)]
    for a, b in _component_adjacency(comp):
        neighbours[a].add(int(b))
        neighbours[b].add(int(a))

    parent = np.arange(n_comp)
    group_size = size.astype(np.int64).copy()

    def find(i):
        root = i
        while parent[root] != root:
            root = parent[root]
        while parent[i] != root:
            parent[i], i = root, parent[i]
        return root

    orphans = np.flatnonzero(~keep)
    orphans = orphans[np.lexsort((orphans, size[orphans]))]
    for c in orphans:
        root = find(c)
        candidates = {find(nb) for nb in neighbours[root]} - {root}
        if not candidates:
            continue
        target = min(candidates, key=lambda r: (-group_size[r], r))
        parent[root] = target
        group_size[target] += group_size[root]
        neighbours[target] |= neighbours[root]
        neighbours[target].discard(target)
        neighbours[root] = set()

    roots = np.array([find(i) for i in range(n_comp)])
    return roots[comp]


def region_adjacency(seg: Segmentation) -> np.ndarray:
    """Symmetric, irreflexive boolean matrix of 4-adjacent region pairs."""
    adj = np.zeros((seg.n_regions, seg.n_regions), dtype=bool)
    pairs = _component_adjacency(seg.labels)
    if len(pairs):
        adj[pairs[:, 0], pairs[:, 1]] = True
        adj[pairs[:, 1], pairs[:, 0]] = True
    return adj


def is_region_connected(seg: Segmentation, q: int) -> bool:
    """True when region ``q`` forms a single 4-connected component."""
    mask = seg.labels == q
    comp = connected_components(mask, connectivity=1, background=0)
    return int(comp.max()) == 1
