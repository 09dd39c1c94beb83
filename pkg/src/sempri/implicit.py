"""Regional training data (80% labeling rule) and the implicit saliency map."""

from __future__ import annotations

import csv
import logging

import numpy as np

from .exceptions import DataError
from .features import TextonDictionary, feature_names, region_feature_matrix
from .fusion import minmax_normalize
from .io import load_image, load_mask, load_score_tensor
from .semantics import argmax_labels
from .superpixel import Segmentation, slic_segment
from .validation import check_mask

log = logging.getLogger(__name__)

SALIENT = 1
BACKGROUND = 0
AMBIGUOUS = -1

# a region is labeled when at least 4/5 of its pixels agree
_AGREE_NUM, _AGREE_DEN = 4, 5


def label_training_regions(seg: Segmentation, mask) -> np.ndarray:
    """Per-region label: 1 (>= 80% salient), 0 (>= 80% background) or -1."""
    mask = check_mask(mask, seg.shape)
    sizes = seg.sizes
    salient = np.bincount(seg.labels.ravel(), weights=mask.ravel(), minlength=seg.n_regions).astype(np.int64)
    background = sizes - salient
    out = np.full(seg.n_regions, AMBIGUOUS, dtype=np.int8)
    # integer comparison keeps the 80% boundary exact
    out[_AGREE_DEN * background >= _AGREE_NUM * sizes] = BACKGROUND
    out[_AGREE_DEN * salient >= _AGREE_NUM * sizes] = SALIENT
    return out


def image_training_samples(image, scores, mask, dictionary: TextonDictionary, *, n_segments=200, compactness=10.0):
    """Features and {0, 1} targets of one image's unambiguous regions."""
    seg = slic_segment(image, n_segments, compactness)
    labels = argmax_labels(scores)
    X = region_feature_matrix(image, scores, labels, seg, dictionary.transform(image))
    region_labels = label_training_regions(seg, mask)
    keep = region_labels != AMBIGUOUS
    return X[keep], region_labels[keep].astype(np.float64)


def build_training_set(manifest, dictionary: TextonDictionary, *, n_segments=200, compactness=10.0, n_classes=None):
    """Concatenate per-image samples in manifest order; ambiguous regions are dropped."""
    Xs, ys = [], []
    for entry in manifest:
        if entry.mask is None:
            raise DataError(f"{entry.image}: training entry has no mask")
        image = load_image(entry.image)
        scores = load_score_tensor(entry.tensor)
        if n_classes is not None and scores.shape[2] != n_classes:
            raise DataError(f"{entry.tensor}: {scores.shape[2]} classes, expected {n_classes}")
        if scores.shape[:2] != image.shape[:2]:
            raise DataError(f"{entry.tensor}: tensor is {scores.shape[:2]}, image is {image.shape[:2]}")
        mask = load_mask(entry.mask, *image.shape[:2])
        X, y = image_training_samples(image, scores, mask, dictionary, n_segments=n_segments, compactness=compactness)
        log.debug("%s: %d samples (%d salient)", entry.image.name, len(y), int(y.sum()))
        Xs.append(X)
        ys.append(y)
    if not Xs:
        raise DataError("empty training manifest")
    return np.vstack(Xs), np.concatenate(ys)


def write_training_csv(X, y, path, n_classes: int) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(feature_names(n_classes) + ["target"])
        for row, target in zip(X, y):
            writer.writerow([f"{v:.17g}" for v in row] + [f"{target:g}"])


def region_predictions_to_map(seg: Segmentation, predictions) -> np.ndarray:
    predictions = np.asarray(predictions, dtype=np.float64)
    if predictions.shape != (seg.n_regions,):
        raise DataError(f"expected {seg.n_regions} region predictions, got {predictions.shape}")
    return minmax_normalize(predictions)[seg.labels]


def implicit_saliency(
    image, scores, seg: Segmentation, dictionary: TextonDictionary, forest, labels=None
) -> np.ndarray:
    """Region-constant map of forest predictions, min-max normalized."""
    if labels is None:
        labels = argmax_labels(scores)
    X = region_feature_matrix(image, scores, labels, seg, dictionary.transform(image))
    return region_predictions_to_map(seg, forest.predict(X))
