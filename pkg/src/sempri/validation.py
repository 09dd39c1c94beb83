"""Input validation helpers shared by estimators and free functions."""

from __future__ import annotations

import numpy as np

from .exceptions import DataError


def check_image(image) -> np.ndarray:
    """Return ``image`` as a contiguous ``(h, w, 3)`` uint8 array."""
    arr = np.asarray(image)
    if arr.ndim != 3 or arr.shape[2] != 3:
        raise DataError(f"image must have shape (h, w, 3), got {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise DataError("image must be at least 1x1")
    if arr.dtype != np.uint8:
        if np.issubdtype(arr.dtype, np.floating) and arr.size and arr.max() <= 1.0 and arr.min() >= 0.0:
            arr = np.floor(arr * 255.0 + 0.5)
        if arr.min() < 0 or arr.max() > 255:
            raise DataError("image values must fit in 8 bits")
        arr = arr.astype(np.uint8)
    return np.ascontiguousarray(arr)


def check_scores(scores, n_classes: int | None = None) -> np.ndarray:
    arr = np.asarray(scores, dtype=np.float64)
    if arr.ndim != 3 or arr.shape[2] < 1:
        raise DataError(f"score tensor must have shape (h, w, n_c), got {arr.shape}")
    if n_classes is not None and arr.shape[2] != n_classes:
        raise DataError(f"score tensor has {arr.shape[2]} classes, expected {n_classes}")
    if not np.all(np.isfinite(arr)):
        raise DataError("score tensor contains non-finite values")
    return arr


def check_label_map(labels, n_classes: int | None = None) -> np.ndarray:
    arr = np.asarray(labels)
    if arr.ndim != 2:
        raise DataError(f"label map must be 2-D, got shape {arr.shape}")
    if not np.issubdtype(arr.dtype, np.integer):
        raise DataError("label map must hold integers")
    if arr.size and arr.min() < 0:
        raise DataError("label map holds negative class indices")
    if n_classes is not None and arr.size and arr.max() >= n_classes:
        raise DataError(f"label map holds class {arr.max()} >= n_classes={n_classes}")
    return arr


def check_mask(mask, shape: tuple[int, int] | None = None) -> np.ndarray:
    arr = np.asarray(mask)
    if arr.ndim != 2:
        raise DataError(f"mask must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise DataError(f"mask shape {arr.shape} does not match {tuple(shape)}")
    if arr.dtype == bool:
        return arr.astype(np.uint8)
    if not np.all((arr == 0) | (arr == 1)):
        raise DataError("mask values must be 0 or 1")
    return arr.astype(np.uint8)


def check_saliency(saliency, shape: tuple[int, int] | None = None, *, unit_range: bool = True) -> np.ndarray:
    """A finite 2-D float map, by default restricted to [0, 1]."""
    arr = np.asarray(saliency, dtype=np.float64)
    if arr.ndim != 2:
        raise DataError(f"saliency map must be 2-D, got shape {arr.shape}")
    if shape is not None and arr.shape != tuple(shape):
        raise DataError(f"saliency map shape {arr.shape} does not match {tuple(shape)}")
    if not np.all(np.isfinite(arr)):
        raise DataError("saliency map contains non-finite values")
    if unit_range and arr.size and (arr.min() < 0.0 or arr.max() > 1.0):
        raise DataError(f"saliency values must lie in [0, 1], got [{arr.min():g}, {arr.max():g}]")
    return arr


def check_same_hw(*arrays) -> tuple[int, int]:
    shapes = {tuple(np.shape(a)[:2]) for a in arrays}
    if len(shapes) != 1:
        raise DataError(f"spatial dimensions disagree: {sorted(shapes)}")
    return shapes.pop()
