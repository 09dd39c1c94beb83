"""Explicit semantic priors: class-pair co-occurrence saliency learned from masks.

For each training image, ``p[k]`` is the fraction of class-``k`` pixels that
are salient and ``theta[k, t]`` flags that classes ``k`` and ``t`` both occur.
The prior table accumulates

    sp[k, t] = sum_i p_i[k] * theta_i[k, t] / (sum_i theta_i[k, t] + eps)

and a test pixel of class ``k`` scores ``sum_t theta[k, t] * sp[k, t]`` over
the classes ``t`` present in the test image.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import CorruptFileError, DataError
from .fusion import minmax_normalize
from .io import atomic_write_bytes, load_mask, load_score_tensor
from .semantics import N_CLASSES, argmax_labels, presence_vector
from .validation import check_label_map, check_mask

DEFAULT_EPSILON = 1e-8


def class_density(labels, mask, k: int) -> float:
    """Fraction of class-``k`` pixels that are salient; 0 when ``k`` is absent."""
    labels = check_label_map(labels)
    mask = check_mask(mask, labels.shape)
    in_class = labels == k
    n = np.count_nonzero(in_class)
    if n == 0:
        return 0.0
    return float(np.count_nonzero(mask[in_class])) / n


def class_densities(labels, mask, n_classes: int) -> np.ndarray:
    """Vector form of :func:`class_density` for all classes at once."""
    flat = labels.ravel()
    counts = np.bincount(flat, minlength=n_classes)
    salient = np.bincount(flat, weights=mask.ravel().astype(np.float64), minlength=n_classes)
    out = np.zeros(n_classes)
    np.divide(salient, counts, out=out, where=counts > 0)
    return out


def cooccurrence(labels, k: int, t: int) -> int:
    """1 when both classes ``k`` and ``t`` appear somewhere in ``labels``."""
    labels = check_label_map(labels)
    return int(bool(np.any(labels == k)) and bool(np.any(labels == t)))


def cooccurrence_matrix(labels, n_classes: int) -> np.ndarray:
    present = presence_vector(labels, n_classes).astype(np.float64)
    return np.outer(present, present)


@dataclass
class ExplicitPriorTable:
    """Learned class-pair priors and the accumulators they came from.

    ``numerator`` and ``denominator`` may be ``None`` for a table loaded from
    a file that only stored ``sp``.
    """

    sp: np.ndarray
    epsilon: float
    n_images: int
    numerator: np.ndarray | None = None
    denominator: np.ndarray | None = None

    @property
    def n_classes(self) -> int:
        return self.sp.shape[0]

    @classmethod
    def from_accumulators(cls, numerator, denominator, epsilon, n_images):
        numerator = np.asarray(numerator, dtype=np.float64)
        denominator = np.asarray(denominator, dtype=np.float64)
        sp = numerator / (denominator + epsilon)
        return cls(sp, float(epsilon), int(n_images), numerator, denominator)

    def merge(self, other: ExplicitPriorTable) -> ExplicitPriorTable:
        """Combine two tables trained on disjoint image sets."""
        if self.numerator is None or other.numerator is None:
            raise DataError("cannot merge tables without accumulators")
        if self.sp.shape != other.sp.shape or self.epsilon != other.epsilon:
            raise DataError("tables disagree on class count or epsilon")
        return ExplicitPriorTable.from_accumulators(
            self.numerator + other.numerator,
            self.denominator + other.denominator,
            self.epsilon,
            self.n_images + other.n_images,
        )

    def save(self, path) -> None:
        """Text format: ``n_c epsilon n_t`` then n_c rows of sp (17 significant digits).

        When accumulators are known, two more n_c-row blocks follow: the
        numerator sums and the co-occurrence counts.
        """
        fmt = "{:.17g}".format
        lines = [f"{self.n_classes} {fmt(self.epsilon)} {self.n_images}"]
        blocks = [self.sp]
        if self.numerator is not None and self.denominator is not None:
            blocks += [self.numerator, self.denominator]
        for block in blocks:
            lines.extend(" ".join(fmt(v) for v in row) for row in block)
        atomic_write_bytes(path, ("\n".join(lines) + "\n").encode("ascii"))

    @classmethod
    def load(cls, path) -> ExplicitPriorTable:
        text = Path(path).read_text(encoding="ascii")
        rows = [line.split() for line in text.splitlines() if line.strip()]
        try:
            n_c, epsilon, n_t = int(rows[0][0]), float(rows[0][1]), int(rows[0][2])
            body = np.array([[float(v) for v in row] for row in rows[1:]], dtype=np.float64)
        except (IndexError, ValueError) as exc:
            raise CorruptFileError(f"{path}: malformed prior table: {exc}") from exc
        if body.ndim != 2 or body.shape[1:] != (n_c,) or body.shape[0] not in (n_c, 3 * n_c):
            raise CorruptFileError(f"{path}: expected {n_c} or {3 * n_c} rows of {n_c} values")
        sp = body[:n_c]
        if body.shape[0] == n_c:
            return cls(sp, epsilon, n_t)
        return cls(sp, epsilon, n_t, body[n_c : 2 * n_c], body[2 * n_c :])


def accumulate_image(labels, mask, n_classes: int) -> tuple[np.ndarray, np.ndarray]:
    """One image's contribution ``(p[k] * theta[k, t], theta[k, t])``."""
    labels = check_label_map(labels, n_classes)
    mask = check_mask(mask, labels.shape)
    theta = cooccurrence_matrix(labels, n_classes)
    p = class_densities(labels, mask, n_classes)
    return p[:, None] * theta, theta


def explicit_saliency(labels, table: ExplicitPriorTable) -> np.ndarray:
    """Per-pixel explicit saliency, min-max normalized (constant maps give zeros)."""
    labels = check_label_map(labels, table.n_classes)
    present = presence_vector(labels, table.n_classes)
    # sum over present partner classes t, then look up by pixel class
    per_class = table.sp @ present.astype(np.float64)
    return minmax_normalize(per_class[labels])


class ExplicitPriors(BaseEstimator):
    """Estimator wrapper: ``fit`` on (label map, mask) pairs, ``predict`` saliency maps.

    Parameters
    ----------
    n_classes : int
        Number of semantic classes, including class 0 ("others").
    epsilon : float
        Added to the co-occurrence count to keep the ratio finite.
    """

    def __init__(self, n_classes: int = N_CLASSES, epsilon: float = DEFAULT_EPSILON):
        self.n_classes = n_classes
        self.epsilon = epsilon

    def fit(self, label_maps, masks):
        if len(label_maps) == 0:
            raise DataError("cannot learn priors from zero images")
        if len(label_maps) != len(masks):
            raise DataError("label maps and masks differ in count")
        num = np.zeros((self.n_classes, self.n_classes))
        den = np.zeros((self.n_classes, self.n_classes))
        for labels, mask in zip(label_maps, masks):
            a, b = accumulate_image(labels, mask, self.n_classes)
            num += a
            den += b
        self.table_ = ExplicitPriorTable.from_accumulators(num, den, self.epsilon, len(label_maps))
        return self

    def predict(self, labels) -> np.ndarray:
        check_is_fitted(self, "table_")
        return explicit_saliency(labels, self.table_)


def train_explicit_priors(manifest, n_classes: int = N_CLASSES, epsilon: float = DEFAULT_EPSILON):
    """Learn an :class:`ExplicitPriorTable` from a train manifest's masks and tensors."""
    entries = list(manifest)
    if not entries:
        raise DataError("empty training manifest")
    num = np.zeros((n_classes, n_classes))
    den = np.zeros((n_classes, n_classes))
    for entry in entries:
        if entry.mask is None:
            raise DataError(f"{entry.image}: training entry has no mask")
        scores = load_score_tensor(entry.tensor)
        if scores.shape[2] != n_classes:
            raise DataError(f"{entry.tensor}: {scores.shape[2]} classes, expected {n_classes}")
        mask = load_mask(entry.mask, *scores.shape[:2])
        a, b = accumulate_image(argmax_labels(scores), mask, n_classes)
        num += a
        den += b
    return ExplicitPriorTable.from_accumulators(num, den, epsilon, len(entries))
