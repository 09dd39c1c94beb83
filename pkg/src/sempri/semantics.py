"""Per-pixel class labels and class presence sets from score tensors.

Class 0 is the catch-all "others" class; classes 1..20 follow the PASCAL VOC
2007 order below.
"""

from __future__ import annotations

import numpy as np

from .validation import check_label_map, check_scores

VOC_CLASSES = (
    "others",
    "aeroplane",
    "bicycle",
    "bird",
    "boat",
    "bottle",
    "bus",
    "car",
    "cat",
    "chair",
    "cow",
    "diningtable",
    "dog",
    "horse",
    "motorbike",
    "person",
    "pottedplant",
    "sheep",
    "sofa",
    "train",
    "tvmonitor",
)
N_CLASSES = len(VOC_CLASSES)


def argmax_labels(scores) -> np.ndarray:
    """Label each pixel with its highest-scoring class (lowest index wins ties)."""
    scores = check_scores(scores)
    # np.argmax returns the first maximizer
    return np.argmax(scores, axis=2).astype(np.int32)


def present_classes(labels) -> set[int]:
    labels = check_label_map(labels)
    return {int(k) for k in np.unique(labels)}


def presence_vector(labels, n_classes: int) -> np.ndarray:
    """Boolean vector of length ``n_classes``; True where the class occurs."""
    labels = check_label_map(labels, n_classes)
    return np.bincount(labels.ravel(), minlength=n_classes) > 0
