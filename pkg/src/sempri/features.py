"""Regional descriptors: geometry, color statistics, textons and semantic features.

Feature layout for ``n_c`` classes (``37 + 2 * n_c`` values, 79 for n_c=21):

    0-1    mean normalized centroid (x, y)
    2-5    bounding box (x_min, y_min, x_max, y_max) / (w, h)
    6      bounding box aspect ratio (width / height)
    7      boundary pixel count / (2 * (h + w))
    8      area / (h * w)
    9      summed area of adjacent regions / (h * w), clamped to 1
    10-12  RGB variances
    13-15  L*a*b* variances
    16-18  mean RGB
    19-21  HSV variances (hue circular)
    22-36  texton histogram
    37-    class-label histogram of the region (n_c)
    ...    region-masked class scores / (h * w) (n_c)

Centroids use 1-based pixel coordinates, ``(x + 1) / w``; bounding boxes use
pixel edges, so a full-image region spans ``(0, 0, 1, 1)``.
"""

from __future__ import annotations

import math
import warnings
from pathlib import Path

import numpy as np
from scipy import fft as sp_fft
from scipy.ndimage import find_objects
from skimage.color import rgb2hsv, rgb2lab
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.cluster import KMeans
from sklearn.exceptions import ConvergenceWarning
from sklearn.utils.validation import check_is_fitted

from .exceptions import CorruptFileError, DataError
from .io import atomic_write_bytes
from .superpixel import Segmentation, region_adjacency
from .validation import check_image, check_label_map, check_same_hw, check_scores

N_GEOMETRIC = 10
N_COLOR = 12
N_TEXTONS = 15
N_FILTERS = 18
N_BASE = N_GEOMETRIC + N_COLOR + N_TEXTONS  # 37

GEOMETRIC_SLICE = slice(0, 10)
COLOR_SLICE = slice(10, 22)
TEXTON_SLICE = slice(22, 37)


def feature_dim(n_classes: int) -> int:
    return N_BASE + 2 * n_classes


def feature_names(n_classes: int) -> list[str]:
    names = [
        "centroid_x",
        "centroid_y",
        "bbox_x_min",
        "bbox_y_min",
        "bbox_x_max",
        "bbox_y_max",
        "bbox_aspect",
        "perimeter",
        "area",
        "neighbor_area",
        "var_r",
        "var_g",
        "var_b",
        "var_l",
        "var_a",
        "var_lab_b",
        "mean_r",
        "mean_g",
        "mean_b",
        "var_h",
        "var_s",
        "var_v",
    ]
    names += [f"texton_{i}" for i in range(N_TEXTONS)]
    names += [f"sp1_{k}" for k in range(n_classes)]
    names += [f"sp2_{k}" for k in range(n_classes)]
    return names


def _check_q(seg: Segmentation, q: int) -> None:
    if not 0 <= q < seg.n_regions:
        raise DataError(f"region index {q} out of range [0, {seg.n_regions})")


# -- geometry ---------------------------------------------------------------


def boundary_pixels(labels: np.ndarray) -> np.ndarray:
    """Pixels with a 4-neighbour in another region or on the image border."""
    edge = np.zeros(labels.shape, dtype=bool)
    edge[0, :] = edge[-1, :] = True
    edge[:, 0] = edge[:, -1] = True
    dx = labels[:, 1:] != labels[:, :-1]
    dy = labels[1:, :] != labels[:-1, :]
    edge[:, 1:] |= dx
    edge[:, :-1] |= dx
    edge[1:, :] |= dy
    edge[:-1, :] |= dy
    return edge


def geometric_feature_matrix(seg: Segmentation) -> np.ndarray:
    labels = seg.labels
    h, w = labels.shape
    n = seg.n_regions
    sizes = seg.sizes.astype(np.float64)
    flat = labels.ravel()
    yy, xx = np.indices((h, w))
    out = np.zeros((n, N_GEOMETRIC))
    # 1-based pixel coordinates: a region spanning columns {0, 1} of a 4-wide image has x = 0.375
    out[:, 0] = np.bincount(flat, weights=(xx.ravel() + 1.0) / w, minlength=n) / sizes
    out[:, 1] = np.bincount(flat, weights=(yy.ravel() + 1.0) / h, minlength=n) / sizes
    for q, sl in enumerate(find_objects(labels + 1, max_label=n)):
        ys, xs = sl
        out[q, 2:6] = xs.start / w, ys.start / h, xs.stop / w, ys.stop / h
        out[q, 6] = (xs.stop - xs.start) / (ys.stop - ys.start)
    edge = boundary_pixels(labels)
    out[:, 7] = np.bincount(flat[edge.ravel()], minlength=n) / (2.0 * (h + w))
    out[:, 8] = sizes / (h * w)
    adj = region_adjacency(seg)
    out[:, 9] = np.minimum(adj.astype(np.float64) @ sizes / (h * w), 1.0)
    return out


def geometric_features(seg: Segmentation, q: int) -> np.ndarray:
    _check_q(seg, q)
    return geometric_feature_matrix(seg)[q]


# -- color --------------------------------------------------------------------


def _region_variance(flat_labels, values, sizes, n):
    mean = np.bincount(flat_labels, weights=values, minlength=n) / sizes
    dev = values - mean[flat_labels]
    return np.bincount(flat_labels, weights=dev * dev, minlength=n) / sizes, mean


def color_feature_matrix(image, seg: Segmentation) -> np.ndarray:
    image = check_image(image)
    check_same_hw(image, seg.labels)
    n = seg.n_regions
    flat = seg.labels.ravel()
    sizes = seg.sizes.astype(np.float64)
    rgb = image.astype(np.float64) / 255.0
    lab = rgb2lab(rgb)
    lab_scaled = np.stack([lab[..., 0] / 100.0, (lab[..., 1] + 128.0) / 255.0, (lab[..., 2] + 128.0) / 255.0], axis=-1)
    hsv = rgb2hsv(rgb)

    out = np.zeros((n, N_COLOR))
    for c in range(3):
        out[:, c], out[:, 6 + c] = _region_variance(flat, rgb[..., c].ravel(), sizes, n)
        out[:, 3 + c], _ = _region_variance(flat, lab_scaled[..., c].ravel(), sizes, n)
    # hue lives on a circle: variance of unit phasors, 1 - |mean direction|
    angle = 2.0 * np.pi * hsv[..., 0].ravel()
    cos_m = np.bincount(flat, weights=np.cos(angle), minlength=n) / sizes
    sin_m = np.bincount(flat, weights=np.sin(angle), minlength=n) / sizes
    out[:, 9] = np.clip(1.0 - np.hypot(cos_m, sin_m), 0.0, 1.0)
    for c in (1, 2):
        out[:, 9 + c], _ = _region_variance(flat, hsv[..., c].ravel(), sizes, n)
    return out


def color_features(image, seg: Segmentation, q: int) -> np.ndarray:
    _check_q(seg, q)
    return color_feature_matrix(image, seg)[q]


# -- textons ------------------------------------------------------------------


def _oriented_kernels(sigma: float, theta: float, elongation: float = 3.0):
    radius = int(math.ceil(3.0 * sigma * elongation))
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1].astype(np.float64)
    u = xx * math.cos(theta) + yy * math.sin(theta)
    v = -xx * math.sin(theta) + yy * math.cos(theta)
    su, sv = sigma * elongation, sigma
    g = np.exp(-0.5 * (u**2 / su**2 + v**2 / sv**2))
    odd = -v / sv**2 * g
    even = (v**2 / sv**4 - 1.0 / sv**2) * g
    return even, odd


def _blob_kernels(sigma: float):
    radius = int(math.ceil(3.0 * sigma))
    yy, xx = np.mgrid[-radius : radius + 1, -radius : radius + 1].astype(np.float64)
    r2 = xx**2 + yy**2
    gauss = np.exp(-0.5 * r2 / sigma**2)
    log = (r2 / sigma**4 - 2.0 / sigma**2) * gauss
    return gauss, log


def _normalize_kernel(k: np.ndarray, zero_mean: bool) -> np.ndarray:
    if zero_mean:
        k = k - k.mean()
    return k / np.abs(k).sum()


def filter_bank(scales=(1.0, 2.0), n_orient: int = 4, blob_sigma: float = 2.0) -> list[np.ndarray]:
    """18 filters: per scale and orientation an even/odd pair, then a Gaussian and a LoG.

    Every kernel has unit L1 norm (derivative kernels are also zero-mean), so
    responses on a [0, 1] grayscale image stay within [-1, 1].
    """
    bank = []
    for sigma in scales:
        for i in range(n_orient):
            even, odd = _oriented_kernels(sigma, math.pi * i / n_orient)
            bank.append(_normalize_kernel(even, True))
            bank.append(_normalize_kernel(odd, True))
    gauss, log = _blob_kernels(blob_sigma)
    bank.append(_normalize_kernel(gauss, False))
    bank.append(_normalize_kernel(log, True))
    return bank


_BANK = filter_bank()


def grayscale(image) -> np.ndarray:
    rgb = check_image(image).astype(np.float64) / 255.0
    return rgb @ np.array([0.299, 0.587, 0.114])


def filter_responses(image) -> np.ndarray:
    """``(h, w, 18)`` filter-bank responses on the grayscale image (reflect padding)."""
    gray = grayscale(image)
    h, w = gray.shape
    pad = max(k.shape[0] for k in _BANK) // 2
    padded = np.pad(gray, pad, mode="symmetric")
    shape = (padded.shape[0] + 2 * pad, padded.shape[1] + 2 * pad)
    fshape = tuple(sp_fft.next_fast_len(s, real=True) for s in shape)
    spectrum = sp_fft.rfft2(padded, fshape)
    out = np.empty((h, w, len(_BANK)))
    for i, k in enumerate(_BANK):
        r = k.shape[0] // 2
        resp = sp_fft.irfft2(spectrum * sp_fft.rfft2(k, fshape), fshape)
        # full convolution: output pixel (y, x) sits at (y + pad + r, x + pad + r)
        out[..., i] = resp[pad + r : pad + r + h, pad + r : pad + r + w]
    return out


def nearest_center(points: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Index of the closest center per point; the lowest index wins ties."""
    best = np.full(points.shape[0], np.inf)
    idx = np.zeros(points.shape[0], dtype=np.int64)
    for j, c in enumerate(centers):
        d = np.sum((points - c) ** 2, axis=1)
        closer = d < best
        best[closer] = d[closer]
        idx[closer] = j
    return idx


class TextonDictionary(BaseEstimator, TransformerMixin):
    """K-means vocabulary over filter-bank responses; ``transform`` gives texton maps.

    Parameters
    ----------
    n_words : int
        Dictionary size.
    max_samples : int
        Cap on pixel responses fed to k-means, drawn uniformly with ``seed``.
    max_iter : int
        Lloyd iterations.
    seed : int
        Seeds subsampling and k-means++ initialization.
    """

    def __init__(self, n_words: int = N_TEXTONS, max_samples: int = 100_000, max_iter: int = 50, seed: int = 0):
        self.n_words = n_words
        self.max_samples = max_samples
        self.max_iter = max_iter
        self.seed = seed

    def fit(self, images, y=None):
        n = len(images)
        if n == 0:
            raise DataError("texton dictionary needs at least one image")
        rng = np.random.default_rng(self.seed)
        # per-image quota keeps memory bounded for large corpora
        quota = -(-self.max_samples // n)
        chunks = []
        for i in range(n):
            resp = filter_responses(images[i]).reshape(-1, N_FILTERS)
            if resp.shape[0] > quota:
                resp = resp[np.sort(rng.choice(resp.shape[0], quota, replace=False))]
            chunks.append(resp)
        responses = np.concatenate(chunks)
        if responses.shape[0] > self.max_samples:
            responses = responses[np.sort(rng.choice(responses.shape[0], self.max_samples, replace=False))]
        km = KMeans(
            n_clusters=self.n_words,
            init="k-means++",
            n_init=1,
            max_iter=self.max_iter,
            random_state=self.seed,
        )
        with warnings.catch_warnings():
            # flat corpora give fewer distinct points than words; duplicate centers are fine
            warnings.simplefilter("ignore", ConvergenceWarning)
            km.fit(responses)
        self.centers_ = np.asarray(km.cluster_centers_, dtype=np.float64)
        return self

    def transform(self, image) -> np.ndarray:
        """Texton index map ``(h, w)`` for one image."""
        check_is_fitted(self, "centers_")
        resp = filter_responses(image)
        h, w = resp.shape[:2]
        return nearest_center(resp.reshape(-1, N_FILTERS), self.centers_).reshape(h, w)

    def save(self, path) -> None:
        check_is_fitted(self, "centers_")
        n, d = self.centers_.shape
        lines = [f"TXTN 1 {n} {d}"]
        lines += [" ".join(f"{v:.17g}" for v in row) for row in self.centers_]
        atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))

    @classmethod
    def load(cls, path) -> TextonDictionary:
        rows = [line.split() for line in Path(path).read_text(encoding="ascii").splitlines() if line.strip()]
        if not rows or rows[0][:2] != ["TXTN", "1"] or len(rows[0]) != 4:
            raise CorruptFileError(f"{path}: not a version-1 texton dictionary")
        try:
            n, d = int(rows[0][2]), int(rows[0][3])
            centers = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
        except ValueError as exc:
            raise CorruptFileError(f"{path}: {exc}") from exc
        if centers.shape != (n, d) or d != N_FILTERS or not np.all(np.isfinite(centers)):
            raise CorruptFileError(f"{path}: expected {n} finite rows of {N_FILTERS} values")
        obj = cls(n_words=n)
        obj.centers_ = centers
        return obj


def build_texton_dictionary(train_images, seed: int = 0) -> TextonDictionary:
    return TextonDictionary(seed=seed).fit(train_images)


def texton_histogram_matrix(texton_map: np.ndarray, seg: Segmentation, n_words: int = N_TEXTONS) -> np.ndarray:
    check_same_hw(texton_map, seg.labels)
    n = seg.n_regions
    counts = np.bincount(seg.labels.ravel() * n_words + texton_map.ravel(), minlength=n * n_words)
    return counts.reshape(n, n_words) / seg.sizes[:, None]


def texton_histogram(image, seg: Segmentation, q: int, dictionary: TextonDictionary) -> np.ndarray:
    _check_q(seg, q)
    texton_map = dictionary.transform(image)
    return texton_histogram_matrix(texton_map, seg, dictionary.centers_.shape[0])[q]


# -- semantic features --------------------------------------------------------


def local_semantic_matrix(labels, seg: Segmentation, n_classes: int) -> np.ndarray:
    """Per-region class-label histogram (rows sum to 1)."""
    labels = check_label_map(labels, n_classes)
    check_same_hw(labels, seg.labels)
    n = seg.n_regions
    counts = np.bincount(seg.labels.ravel() * n_classes + labels.ravel(), minlength=n * n_classes)
    return counts.reshape(n, n_classes) / seg.sizes[:, None]


def local_semantic_feature(labels, seg: Segmentation, q: int, n_classes: int) -> np.ndarray:
    _check_q(seg, q)
    return local_semantic_matrix(labels, seg, n_classes)[q]


def global_semantic_matrix(scores, seg: Segmentation) -> np.ndarray:
    """Per-region summed class scores divided by the image area."""
    scores = check_scores(scores)
    check_same_hw(scores, seg.labels)
    h, w, n_c = scores.shape
    flat = seg.labels.ravel()
    flat_scores = scores.reshape(-1, n_c)
    out = np.empty((seg.n_regions, n_c))
    for k in range(n_c):
        out[:, k] = np.bincount(flat, weights=flat_scores[:, k], minlength=seg.n_regions)
    return out / (h * w)


def global_semantic_feature(scores, seg: Segmentation, q: int) -> np.ndarray:
    _check_q(seg, q)
    return global_semantic_matrix(scores, seg)[q]


# -- assembly -----------------------------------------------------------------


def region_feature_matrix(image, scores, labels, seg: Segmentation, texton_map) -> np.ndarray:
    """All regions' descriptors, shape ``(n_regions, 37 + 2 * n_c)``."""
    scores = check_scores(scores)
    check_same_hw(image, scores, labels, seg.labels, texton_map)
    n_c = scores.shape[2]
    return np.hstack(
        [
            geometric_feature_matrix(seg),
            color_feature_matrix(image, seg),
            texton_histogram_matrix(texton_map, seg),
            local_semantic_matrix(labels, seg, n_c),
            global_semantic_matrix(scores, seg),
        ]
    )


def assemble_features(image, scores, labels, seg: Segmentation, q: int, dictionary: TextonDictionary) -> np.ndarray:
    _check_q(seg, q)
    return region_feature_matrix(image, scores, labels, seg, dictionary.transform(image))[q]
