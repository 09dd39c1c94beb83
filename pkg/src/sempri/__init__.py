"""Salient object detection driven by semantic class priors.

Two complementary maps are learned from annotated images and per-pixel class
scores: an explicit map from class co-occurrence saliency statistics, and an
implicit map from a regression forest over superpixel features. They are
blended adaptively into the final saliency map.
"""

from .exceptions import CorruptFileError, DataError, InvariantError, SempriError, UnsupportedFormatError
from .explicit import ExplicitPriors, ExplicitPriorTable, explicit_saliency
from .features import TextonDictionary, assemble_features, feature_dim, region_feature_matrix
from .forest import RegressionForest
from .fusion import blend, compute_weights, final_rescale, fuse, minmax_normalize
from .metrics import EvaluationReport, adaptive_threshold, evaluate_dataset, f_measure, mae, pr_curve, score_image
from .pipeline import PipelineConfig, SaliencyResult, SemanticPriorSaliency
from .semantics import N_CLASSES, VOC_CLASSES, argmax_labels
from .superpixel import Segmentation, region_adjacency, slic_segment

__version__ = "0.1.0"

__all__ = [
    "N_CLASSES",
    "VOC_CLASSES",
    "CorruptFileError",
    "DataError",
    "EvaluationReport",
    "ExplicitPriorTable",
    "ExplicitPriors",
    "InvariantError",
    "PipelineConfig",
    "RegressionForest",
    "SaliencyResult",
    "Segmentation",
    "SemanticPriorSaliency",
    "SempriError",
    "TextonDictionary",
    "UnsupportedFormatError",
    "adaptive_threshold",
    "argmax_labels",
    "assemble_features",
    "blend",
    "compute_weights",
    "evaluate_dataset",
    "explicit_saliency",
    "f_measure",
    "feature_dim",
    "final_rescale",
    "fuse",
    "mae",
    "minmax_normalize",
    "pr_curve",
    "region_adjacency",
    "region_feature_matrix",
    "score_image",
    "slic_segment",
]
