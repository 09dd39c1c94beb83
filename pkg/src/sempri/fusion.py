"""Adaptive blending of explicit and implicit saliency maps, plus final rescaling."""

from __future__ import annotations

import math
from typing import NamedTuple

import numpy as np

from .validation import check_saliency, check_same_hw

SALIENT_LEVEL = 0.5
MIN_SALIENT_FRACTION = 0.1


def minmax_normalize(values) -> np.ndarray:
    """Scale to [0, 1]; a map without contrast becomes all zeros."""
    v = np.asarray(values, dtype=np.float64)
    if v.size == 0:
        return v.copy()
    lo, hi = v.min(), v.max()
    if not hi > lo:
        return np.zeros_like(v)
    out = (v - lo) / (hi - lo)
    # guard against 1 + ulp from the division
    return np.clip(out, 0.0, 1.0, out=out)


class FusionWeights(NamedTuple):
    alpha: float
    gamma: float


def compute_weights(implicit) -> FusionWeights:
    """``alpha`` is the mean implicit saliency, ``gamma = 1 - alpha``."""
    implicit = check_saliency(implicit)
    alpha = float(np.mean(implicit))
    alpha = min(max(alpha, 0.0), 1.0)
    return FusionWeights(alpha, 1.0 - alpha)


def blend(explicit, implicit) -> tuple[np.ndarray, FusionWeights]:
    """Affine combination ``alpha * explicit + gamma * implicit`` before rescaling."""
    explicit = check_saliency(explicit)
    implicit = check_saliency(implicit)
    check_same_hw(explicit, implicit)
    weights = compute_weights(implicit)
    mixed = weights.alpha * explicit + weights.gamma * implicit
    # rounding can leave the blend an ulp outside [min, max] of the inputs
    np.clip(mixed, np.minimum(explicit, implicit), np.maximum(explicit, implicit), out=mixed)
    return mixed, weights


def final_rescale(saliency) -> np.ndarray:
    """Min-max normalize, then lift dim maps so at least 10% of pixels reach 0.5.

    When fewer than 10% of pixels are >= 0.5 after normalization, values are
    raised to the power ``g = ln 0.5 / ln p90`` so the 90th percentile lands on
    0.5. The mapping is monotone, so pixel ranks are preserved.
    """
    s = minmax_normalize(check_saliency(saliency, unit_range=False))
    if s.size == 0 or np.mean(s >= SALIENT_LEVEL) >= MIN_SALIENT_FRACTION:
        return s
    p90 = float(np.percentile(s, 100.0 * (1.0 - MIN_SALIENT_FRACTION)))
    if not 0.0 < p90 < 1.0:
        return s
    g = math.log(SALIENT_LEVEL) / math.log(p90)
    return np.power(s, g)


def fuse(explicit, implicit) -> np.ndarray:
    mixed, _ = blend(explicit, implicit)
    return final_rescale(mixed)
