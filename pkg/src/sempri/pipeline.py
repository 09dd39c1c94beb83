"""End-to-end semantic-prior saliency estimator and its configuration."""

from __future__ import annotations

import dataclasses
import json
import logging
import os
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .exceptions import DataError
from .explicit import DEFAULT_EPSILON, ExplicitPriors, ExplicitPriorTable, explicit_saliency
from .features import N_TEXTONS, TextonDictionary, region_feature_matrix
from .forest import RegressionForest
from .fusion import blend, final_rescale, minmax_normalize
from .implicit import AMBIGUOUS, label_training_regions
from .io import normalize_scores
from .metrics import score_image
from .semantics import N_CLASSES, argmax_labels
from .superpixel import DEFAULT_COMPACTNESS, DEFAULT_REGIONS, Segmentation, slic_segment
from .validation import check_image, check_mask, check_same_hw, check_scores

log = logging.getLogger(__name__)

PRIORS_FILE = "priors.txt"
TEXTONS_FILE = "textons.txt"
FOREST_FILE = "forest.sprf"


@dataclass
class PipelineConfig:
    """Every tunable of the pipeline: 21 classes, 200 superpixels, a 200-tree forest."""

    n_classes: int = N_CLASSES
    n_segments: int = DEFAULT_REGIONS
    compactness: float = DEFAULT_COMPACTNESS
    n_trees: int = 200
    max_depth: int = 20
    min_leaf: int = 5
    max_features: int | None = None
    n_textons: int = N_TEXTONS
    texton_samples: int = 100_000
    epsilon: float = DEFAULT_EPSILON
    seed: int = 0
    jobs: int | None = None  # None: one worker per logical core
    priors_path: str = PRIORS_FILE
    textons_path: str = TEXTONS_FILE
    forest_path: str = FOREST_FILE

    def __post_init__(self):
        ints = {
            "n_classes": 2,
            "n_segments": 1,
            "n_trees": 1,
            "max_depth": 1,
            "min_leaf": 1,
            "n_textons": 1,
            "texton_samples": 1,
            "seed": 0,
        }
        for name, lo in ints.items():
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < lo:
                raise DataError(f"config {name} must be an integer >= {lo}, got {v!r}")
        for name in ("max_features", "jobs"):
            v = getattr(self, name)
            if v is not None and (isinstance(v, bool) or not isinstance(v, int) or v < 1):
                raise DataError(f"config {name} must be null or a positive integer, got {v!r}")
        for name in ("compactness", "epsilon"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, (int, float)) or not v > 0:
                raise DataError(f"config {name} must be a positive number, got {v!r}")
        for name in ("priors_path", "textons_path", "forest_path"):
            if not isinstance(getattr(self, name), str):
                raise DataError(f"config {name} must be a string")

    @classmethod
    def from_json(cls, path) -> PipelineConfig:
        data = json.loads(Path(path).read_text(encoding="utf-8"))
        if not isinstance(data, dict):
            raise DataError(f"{path}: config must be a JSON object")
        known = {f.name for f in dataclasses.fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise DataError(f"{path}: unknown config keys {sorted(unknown)}")
        return cls(**data)

    def updated(self, **overrides) -> PipelineConfig:
        return dataclasses.replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def to_json(self) -> str:
        return json.dumps(dataclasses.asdict(self), indent=2, sort_keys=True)

    def estimator(self) -> SemanticPriorSaliency:
        return SemanticPriorSaliency(
            n_classes=self.n_classes,
            n_segments=self.n_segments,
            compactness=self.compactness,
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            max_features=self.max_features,
            n_textons=self.n_textons,
            texton_samples=self.texton_samples,
            epsilon=self.epsilon,
            seed=self.seed,
            n_jobs=self.jobs or os.cpu_count() or 1,
        )


@dataclass(frozen=True, eq=False)
class SaliencyResult:
    explicit: np.ndarray
    implicit: np.ndarray
    fused: np.ndarray
    alpha: float
    segmentation: Segmentation


def _region_samples(image, scores, mask, textons, n_segments, compactness):
    """All-region features of one training image plus their 80%-rule labels and sizes."""
    image = check_image(image)
    scores = normalize_scores(check_scores(scores))
    mask = check_mask(mask, image.shape[:2])
    seg = slic_segment(image, n_segments, compactness)
    X = region_feature_matrix(image, scores, argmax_labels(scores), seg, textons.transform(image))
    return X, label_training_regions(seg, mask), seg.sizes


class SemanticPriorSaliency(BaseEstimator):
    """Fuses an explicit class-prior map with an implicit regional-regressor map.

    ``fit`` takes parallel sequences of RGB images, ``(h, w, n_c)`` score
    tensors and binary masks; ``predict`` returns one fused map per image.
    Sequences may be lazy (any object with ``__len__`` and ``__getitem__``).
    """

    def __init__(
        self,
        n_classes=N_CLASSES,
        n_segments=DEFAULT_REGIONS,
        compactness=DEFAULT_COMPACTNESS,
        n_trees=200,
        max_depth=20,
        min_leaf=5,
        max_features=None,
        n_textons=N_TEXTONS,
        texton_samples=100_000,
        epsilon=DEFAULT_EPSILON,
        seed=0,
        n_jobs=1,
    ):
        self.n_classes = n_classes
        self.n_segments = n_segments
        self.compactness = compactness
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.n_textons = n_textons
        self.texton_samples = texton_samples
        self.epsilon = epsilon
        self.seed = seed
        self.n_jobs = n_jobs

    def _check_triplet(self, image, scores, mask=None):
        image = check_image(image)
        # same ingestion rule as SPST files: off-simplex pixels are softmaxed
        scores = normalize_scores(check_scores(scores, self.n_classes))
        check_same_hw(image, scores)
        if mask is not None:
            mask = check_mask(mask, image.shape[:2])
        return image, scores, mask

    def fit(self, images: Sequence, scores: Sequence, masks: Sequence):
        n = len(images)
        if n == 0:
            raise DataError("cannot fit on zero images")
        if len(scores) != n or len(masks) != n:
            raise DataError("images, scores and masks differ in length")

        labels = []
        checked_masks = []
        for i in range(n):
            _, s, m = self._check_triplet(images[i], scores[i], masks[i])
            labels.append(argmax_labels(s))
            checked_masks.append(m)
        self.priors_ = ExplicitPriors(self.n_classes, self.epsilon).fit(labels, checked_masks)
        del labels, checked_masks

        self.textons_ = TextonDictionary(self.n_textons, max_samples=self.texton_samples, seed=self.seed)
        self.textons_.fit(images)

        parallel = Parallel(n_jobs=self.n_jobs)
        per_image = parallel(
            delayed(_region_samples)(images[i], scores[i], masks[i], self.textons_, self.n_segments, self.compactness)
            for i in range(n)
        )
        X = np.vstack([X[lab != AMBIGUOUS] for X, lab, _ in per_image])
        y = np.concatenate([lab[lab != AMBIGUOUS] for _, lab, _ in per_image]).astype(np.float64)
        if len(y) < 2:
            raise DataError(f"only {len(y)} unambiguous training regions")
        self.forest_ = RegressionForest(
            n_trees=self.n_trees,
            max_depth=self.max_depth,
            min_leaf=self.min_leaf,
            max_features=self.max_features,
            seed=self.seed,
            n_jobs=self.n_jobs,
        ).fit(X, y)

        alphas = []
        for Xi, _, sizes in per_image:
            pred = minmax_normalize(self.forest_.predict(Xi))
            alphas.append(float(pred @ sizes / sizes.sum()))
        self.training_summary_ = {
            "n_images": n,
            "n_samples": len(y),
            "n_salient": int(y.sum()),
            "n_ambiguous": int(sum(int(np.sum(lab == AMBIGUOUS)) for _, lab, _ in per_image)),
            "alpha_mean": float(np.mean(alphas)),
            "alpha_min": float(np.min(alphas)),
            "alpha_max": float(np.max(alphas)),
            "seed": self.seed,
        }
        return self

    def predict_components(self, image, scores) -> SaliencyResult:
        check_is_fitted(self, "forest_")
        image, scores, _ = self._check_triplet(image, scores)
        labels = argmax_labels(scores)
        seg = slic_segment(image, self.n_segments, self.compactness)
        explicit = explicit_saliency(labels, self.priors_.table_)
        X = region_feature_matrix(image, scores, labels, seg, self.textons_.transform(image))
        implicit = minmax_normalize(self.forest_.predict(X))[seg.labels]
        mixed, weights = blend(explicit, implicit)
        return SaliencyResult(explicit, implicit, final_rescale(mixed), weights.alpha, seg)

    def predict_one(self, image, scores) -> np.ndarray:
        return self.predict_components(image, scores).fused

    def predict(self, images: Sequence, scores: Sequence) -> list[np.ndarray]:
        if len(images) != len(scores):
            raise DataError("images and scores differ in length")
        return [self.predict_one(images[i], scores[i]) for i in range(len(images))]

    def score(self, images, scores, masks) -> float:
        """Mean adaptive-threshold F-measure."""
        fused = self.predict(images, scores)
        return float(np.mean([score_image(s, check_mask(m)).f_measure for s, m in zip(fused, masks)]))

    # -- artifacts --------------------------------------------------------------

    def save(self, directory, config: PipelineConfig | None = None) -> dict[str, Path]:
        check_is_fitted(self, "forest_")
        config = config or PipelineConfig()
        directory = Path(directory)
        directory.mkdir(parents=True, exist_ok=True)
        paths = {
            "priors": directory / config.priors_path,
            "textons": directory / config.textons_path,
            "forest": directory / config.forest_path,
        }
        self.priors_.table_.save(paths["priors"])
        self.textons_.save(paths["textons"])
        self.forest_.save(paths["forest"])
        return paths

    @classmethod
    def load(cls, directory, config: PipelineConfig | None = None) -> SemanticPriorSaliency:
        config = config or PipelineConfig()
        directory = Path(directory)
        paths = [directory / p for p in (config.priors_path, config.textons_path, config.forest_path)]
        for p in paths:
            if not p.is_file():
                raise DataError(f"missing artifact {p}")
        table = ExplicitPriorTable.load(paths[0])
        if table.n_classes != config.n_classes:
            raise DataError(f"{paths[0]}: {table.n_classes} classes, config says {config.n_classes}")
        est = config.estimator()
        est.priors_ = ExplicitPriors(table.n_classes, table.epsilon)
        est.priors_.table_ = table
        est.textons_ = TextonDictionary.load(paths[1])
        est.forest_ = RegressionForest.load(paths[2])
        return est
