"""Saliency benchmark metrics: PR curves, adaptive thresholding, F-measure, MAE.

Conventions: a pixel is predicted salient when ``255 * S >= tau`` (fixed
thresholds) or ``S >= tau`` (adaptive threshold); precision is 1 when nothing
is predicted salient; the F-measure is 0 when precision and recall are both 0.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .exceptions import DataError
from .io import atomic_write_bytes, load_mask, load_saliency_map
from .validation import check_mask, check_saliency

log = logging.getLogger(__name__)

BETA_SQUARED = 0.3
N_THRESHOLDS = 256


@dataclass(frozen=True)
class MetricConfig:
    beta_squared: float = BETA_SQUARED

    def __post_init__(self):
        if not self.beta_squared > 0:
            raise DataError("beta_squared must be positive")


@dataclass(frozen=True, eq=False)
class PRCurve:
    thresholds: np.ndarray  # 0..255
    precision: np.ndarray
    recall: np.ndarray

    def __len__(self) -> int:
        return len(self.thresholds)

    def points(self):
        """Iterate ``(threshold, precision, recall)`` triples."""
        return zip(self.thresholds.tolist(), self.precision.tolist(), self.recall.tolist())


def _pair(saliency, gt):
    s = check_saliency(saliency)
    g = check_mask(gt, s.shape)
    return s, g.astype(bool)


def pr_curve(saliency, gt) -> PRCurve:
    s, g = _pair(saliency, gt)
    n_pos = int(np.count_nonzero(g))
    if n_pos == 0:
        raise DataError("ground truth has no salient pixel; recall is undefined")
    # 255*S >= tau  <=>  floor(255*S) >= tau for integer tau
    level = np.clip(np.floor(255.0 * s), 0, 255).astype(np.int64)
    pos_hist = np.bincount(level[g], minlength=N_THRESHOLDS)
    neg_hist = np.bincount(level[~g], minlength=N_THRESHOLDS)
    tp = np.cumsum(pos_hist[::-1])[::-1]
    fp = np.cumsum(neg_hist[::-1])[::-1]
    predicted = tp + fp
    precision = np.ones(N_THRESHOLDS)
    np.divide(tp, predicted, out=precision, where=predicted > 0)
    recall = tp / n_pos
    return PRCurve(np.arange(N_THRESHOLDS), precision, recall)


def adaptive_threshold(saliency) -> float:
    """Twice the mean saliency, clamped to [0, 1]."""
    s = check_saliency(saliency)
    return float(min(max(2.0 * np.mean(s), 0.0), 1.0))


def precision_recall_at(saliency, gt, tau: float) -> tuple[float, float]:
    s, g = _pair(saliency, gt)
    n_pos = int(np.count_nonzero(g))
    if n_pos == 0:
        raise DataError("ground truth has no salient pixel; recall is undefined")
    pred = s >= tau
    tp = int(np.count_nonzero(pred & g))
    n_pred = int(np.count_nonzero(pred))
    precision = tp / n_pred if n_pred else 1.0
    return precision, tp / n_pos


def f_measure(precision: float, recall: float, cfg: MetricConfig = MetricConfig()) -> float:
    b2 = cfg.beta_squared
    denom = b2 * precision + recall
    if denom == 0:
        return 0.0
    return (1.0 + b2) * precision * recall / denom


def mae(saliency, gt) -> float:
    s, g = _pair(saliency, gt)
    return float(np.mean(np.abs(s - g)))


@dataclass(frozen=True)
class ImageScores:
    curve: PRCurve
    adaptive_precision: float
    adaptive_recall: float
    f_measure: float
    mae: float


def score_image(saliency, gt, cfg: MetricConfig = MetricConfig()) -> ImageScores:
    curve = pr_curve(saliency, gt)
    p, r = precision_recall_at(saliency, gt, adaptive_threshold(saliency))
    return ImageScores(curve, p, r, f_measure(p, r, cfg), mae(saliency, gt))


@dataclass(frozen=True, eq=False)
class EvaluationReport:
    """Macro-averaged scores over a dataset, in manifest order."""

    n_images: int
    precision: np.ndarray
    recall: np.ndarray
    adaptive_precision: float
    adaptive_recall: float
    f_measure: float
    mae: float
    beta_squared: float = BETA_SQUARED

    @classmethod
    def from_scores(cls, scores: list[ImageScores], cfg: MetricConfig = MetricConfig()) -> EvaluationReport:
        if not scores:
            raise DataError("no images to evaluate")
        return cls(
            n_images=len(scores),
            precision=np.mean([s.curve.precision for s in scores], axis=0),
            recall=np.mean([s.curve.recall for s in scores], axis=0),
            adaptive_precision=float(np.mean([s.adaptive_precision for s in scores])),
            adaptive_recall=float(np.mean([s.adaptive_recall for s in scores])),
            f_measure=float(np.mean([s.f_measure for s in scores])),
            mae=float(np.mean([s.mae for s in scores])),
            beta_squared=cfg.beta_squared,
        )

    def to_csv(self) -> str:
        g = "{:.9g}".format
        lines = [
            f"# images: {self.n_images}; PR curve and adaptive scores are per-image means",
            "# predicted salient: 255*S >= threshold (curve), S >= min(2*mean(S), 1) (adaptive)",
            f"# precision = 1 when no pixel is predicted salient; F = 0 when P = R = 0; beta^2 = {g(self.beta_squared)}",
            "threshold,precision,recall",
        ]
        lines += [f"{t},{g(p)},{g(r)}" for t, (p, r) in enumerate(zip(self.precision, self.recall))]
        lines += [
            "",
            "adaptive_precision,adaptive_recall,f_measure,mae",
            f"{g(self.adaptive_precision)},{g(self.adaptive_recall)},{g(self.f_measure)},{g(self.mae)}",
        ]
        return "\n".join(lines) + "\n"

    def write_csv(self, path) -> None:
        atomic_write_bytes(path, self.to_csv().encode("utf-8"))


def read_report_csv(path) -> EvaluationReport:
    """Parse a report written by :meth:`EvaluationReport.write_csv`."""
    lines = [ln for ln in Path(path).read_text(encoding="utf-8").splitlines()]
    n_images, beta2 = 0, BETA_SQUARED
    for ln in lines:
        if ln.startswith("# images:"):
            n_images = int(ln.split(":")[1].split(";")[0])
        if "beta^2 = " in ln:
            beta2 = float(ln.rsplit("=", 1)[1])
    body = [ln for ln in lines if ln and not ln.startswith("#")]
    start = body.index("threshold,precision,recall") + 1
    rows = [tuple(map(float, ln.split(","))) for ln in body[start : start + N_THRESHOLDS]]
    summary = tuple(map(float, body[body.index("adaptive_precision,adaptive_recall,f_measure,mae") + 1].split(",")))
    return EvaluationReport(
        n_images,
        np.array([r[1] for r in rows]),
        np.array([r[2] for r in rows]),
        *summary,
        beta_squared=beta2,
    )


def evaluate_dataset(maps_dir, manifest, cfg: MetricConfig = MetricConfig()) -> EvaluationReport:
    """Score ``<maps_dir>/<image stem>.png`` against each manifest entry's mask."""
    maps_dir = Path(maps_dir)
    scores = []
    for entry in manifest:
        map_path = maps_dir / f"{entry.stem}.png"
        if not map_path.is_file():
            raise DataError(f"missing saliency map for {entry.image.name}: {map_path}")
        if entry.mask is None:
            raise DataError(f"{entry.image.name}: evaluation needs a ground-truth mask")
        saliency = load_saliency_map(map_path)
        gt = load_mask(entry.mask, *saliency.shape)
        scores.append(score_image(saliency, gt, cfg))
    return EvaluationReport.from_scores(scores, cfg)
