"""Bagged regression trees with variance-reduction splits.

Each tree is grown on a bootstrap sample drawn from its own seed (spawned
from the master seed), considers ``max_features`` random features per node
and splits at midpoints between consecutive distinct values. Equal-gain
splits resolve to the lowest feature index, then the lowest threshold, so a
fixed seed reproduces the forest byte for byte.

Binary format (little-endian)::

    b"SPRF" | u32 version | u32 n_trees | u32 max_depth | u32 min_leaf
    | u32 max_features | u64 seed | u32 n_features
    then per tree a preorder node stream:
        u8 0, f64 value                       (leaf)
        u8 1, u32 feature, f64 threshold      (split; left subtree, then right)
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from joblib import Parallel, delayed
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted

from .exceptions import CorruptFileError, DataError
from .io import atomic_write_bytes

log = logging.getLogger(__name__)

SPRF_MAGIC = b"SPRF"
SPRF_VERSION = 1
_HEADER = struct.Struct("<4sIIIIIQI")
_LEAF = struct.Struct("<Bd")
_SPLIT = struct.Struct("<BId")


@dataclass(frozen=True, eq=False)
class Tree:
    """Flat node arrays in preorder; ``feature == -1`` marks a leaf."""

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray

    @property
    def n_nodes(self) -> int:
        return len(self.feature)

    def apply(self, X: np.ndarray) -> np.ndarray:
        node = np.zeros(X.shape[0], dtype=np.int64)
        rows = np.arange(X.shape[0])
        active = self.feature[node] >= 0
        while np.any(active):
            r, nd = rows[active], node[active]
            go_left = X[r, self.feature[nd]] <= self.threshold[nd]
            node[r] = np.where(go_left, self.left[nd], self.right[nd])
            active[r] = self.feature[node[r]] >= 0
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=np.int64)
        for i in range(self.n_nodes):
            if self.feature[i] >= 0:
                depth[self.left[i]] = depth[self.right[i]] = depth[i] + 1
        return int(depth.max())


def _best_split(X, y, idx, features, min_leaf):
    """Return (sse, feature, threshold) of the best split, or None."""
    n = len(idx)
    best = None
    for f in features:
        x = X[idx, f]
        order = np.argsort(x, kind="stable")
        xs = x[order]
        ys = y[idx[order]]
        c1 = np.cumsum(ys)
        c2 = np.cumsum(ys * ys)
        # left child = first i samples, i in [min_leaf, n - min_leaf]
        i = np.arange(min_leaf, n - min_leaf + 1)
        valid = xs[i - 1] < xs[i]
        if not np.any(valid):
            continue
        i = i[valid]
        s1l, s2l = c1[i - 1], c2[i - 1]
        s1r, s2r = c1[-1] - s1l, c2[-1] - s2l
        sse = (s2l - s1l * s1l / i) + (s2r - s1r * s1r / (n - i))
        j = int(np.argmin(sse))  # first minimum = lowest threshold
        if best is None or sse[j] < best[0]:
            lo, hi = xs[i[j] - 1], xs[i[j]]
            thr = 0.5 * (lo + hi)
            if thr >= hi:  # adjacent floats: the midpoint rounds up
                thr = lo
            best = (float(sse[j]), int(f), float(thr))
    return best


def build_tree(X, y, rng, max_depth, min_leaf, max_features) -> Tree:
    n, d = X.shape
    feature, threshold, left, right, value = [], [], [], [], []
    # (sample indices, depth, parent node, is_left)
    stack = [(np.arange(n), 0, -1, False)]
    while stack:
        idx, depth, parent, is_left = stack.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        yi = y[idx]
        mean = float(yi.mean())
        feature.append(-1)
        threshold.append(0.0)
        left.append(-1)
        right.append(-1)
        value.append(mean)

        if depth >= max_depth or len(idx) < 2 * min_leaf:
            continue
        parent_sse = float(np.sum((yi - mean) ** 2))
        if parent_sse <= 0.0:
            continue
        candidates = np.sort(rng.choice(d, size=min(max_features, d), replace=False))
        split = _best_split(X, y, idx, candidates, min_leaf)
        if split is None or not split[0] < parent_sse:
            continue
        _, f, thr = split
        go_left = X[idx, f] <= thr
        feature[node] = f
        threshold[node] = thr
        # right pushed first so the left subtree is emitted next (preorder)
        stack.append((idx[~go_left], depth + 1, node, False))
        stack.append((idx[go_left], depth + 1, node, True))
    return Tree(
        np.array(feature, dtype=np.int64),
        np.array(threshold, dtype=np.float64),
        np.array(left, dtype=np.int64),
        np.array(right, dtype=np.int64),
        np.array(value, dtype=np.float64),
    )


def _grow(X, y, seed_seq, max_depth, min_leaf, max_features):
    rng = np.random.default_rng(seed_seq)
    boot = rng.integers(0, X.shape[0], X.shape[0])
    return build_tree(X[boot], y[boot], rng, max_depth, min_leaf, max_features)


class RegressionForest(BaseEstimator, RegressorMixin):
    """Random-forest regressor for targets in [0, 1].

    Parameters
    ----------
    n_trees : int, default 200
    max_depth : int, default 20
    min_leaf : int, default 5
        Minimum samples in each child of a split.
    max_features : int or None, default None
        Candidate features per split; ``None`` means ``ceil(sqrt(n_features))``.
    seed : int, default 0
    n_jobs : int, default 1
        Workers for tree growing. Results do not depend on it.
    """

    def __init__(self, n_trees=200, max_depth=20, min_leaf=5, max_features=None, seed=0, n_jobs=1):
        self.n_trees = n_trees
        self.max_depth = max_depth
        self.min_leaf = min_leaf
        self.max_features = max_features
        self.seed = seed
        self.n_jobs = n_jobs

    def fit(self, X, y):
        X = np.asarray(X, dtype=np.float64)
        y = np.asarray(y, dtype=np.float64)
        if X.ndim != 2 or X.shape[0] != y.shape[0] or X.shape[0] < 2:
            raise DataError(f"need >= 2 samples with matching X {X.shape} and y {y.shape}")
        if not (np.all(np.isfinite(X)) and np.all(np.isfinite(y))):
            raise DataError("training data contains non-finite values")
        if y.min() < 0.0 or y.max() > 1.0:
            raise DataError("targets must lie in [0, 1]")
        if y.min() == y.max():
            log.warning("all %d targets equal %g; forest will be constant", len(y), y[0])
        if self.n_trees < 1 or self.max_depth < 0 or self.min_leaf < 1:
            raise DataError("n_trees >= 1, max_depth >= 0 and min_leaf >= 1 are required")
        self.n_features_in_ = X.shape[1]
        self.max_features_ = self.max_features or math.ceil(math.sqrt(self.n_features_in_))
        seeds = np.random.SeedSequence(self.seed).spawn(self.n_trees)
        args = (self.max_depth, self.min_leaf, self.max_features_)
        if self.n_jobs == 1:
            self.trees_ = [_grow(X, y, s, *args) for s in seeds]
        else:
            self.trees_ = Parallel(n_jobs=self.n_jobs)(delayed(_grow)(X, y, s, *args) for s in seeds)
        return self

    def _check_X(self, X):
        check_is_fitted(self, "trees_")
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.ndim != 2 or X.shape[1] != self.n_features_in_:
            raise DataError(f"expected {self.n_features_in_} features, got shape {X.shape}")
        return X

    def predict(self, X) -> np.ndarray:
        X = self._check_X(X)
        total = np.zeros(X.shape[0])
        for tree in self.trees_:
            total += tree.predict(X)
        return total / len(self.trees_)

    # -- serialization ----------------------------------------------------------

    def to_bytes(self) -> bytes:
        check_is_fitted(self, "trees_")
        parts = [
            _HEADER.pack(
                SPRF_MAGIC,
                SPRF_VERSION,
                len(self.trees_),
                self.max_depth,
                self.min_leaf,
                self.max_features_,
                self.seed,
                self.n_features_in_,
            )
        ]
        for tree in self.trees_:
            for i in range(tree.n_nodes):
                f = int(tree.feature[i])
                if f < 0:
                    parts.append(_LEAF.pack(0, tree.value[i]))
                else:
                    parts.append(_SPLIT.pack(1, f, tree.threshold[i]))
        return b"".join(parts)

    def save(self, path) -> None:
        atomic_write_bytes(path, self.to_bytes())

    @classmethod
    def from_bytes(cls, data: bytes) -> RegressionForest:
        if len(data) < _HEADER.size:
            raise CorruptFileError("truncated forest header")
        magic, version, n_trees, max_depth, min_leaf, max_features, seed, n_features = _HEADER.unpack_from(data)
        if magic != SPRF_MAGIC:
            raise CorruptFileError(f"bad forest magic {magic!r}")
        if version != SPRF_VERSION:
            raise CorruptFileError(f"unsupported forest version {version}")
        pos = _HEADER.size
        trees = []
        try:
            for _ in range(n_trees):
                tree, pos = _read_tree(data, pos, n_features)
                trees.append(tree)
        except struct.error as exc:
            raise CorruptFileError(f"truncated forest stream: {exc}") from exc
        if pos != len(data):
            raise CorruptFileError(f"{len(data) - pos} trailing bytes after forest")
        forest = cls(n_trees=n_trees, max_depth=max_depth, min_leaf=min_leaf, max_features=max_features, seed=seed)
        forest.n_features_in_ = n_features
        forest.max_features_ = max_features
        forest.trees_ = trees
        return forest

    @classmethod
    def load(cls, path) -> RegressionForest:
        return cls.from_bytes(Path(path).read_bytes())


def _read_tree(data, pos, n_features):
    feature, threshold, left, right, value = [], [], [], [], []
    # stack of (parent, is_left) awaiting a child
    pending = [(-1, False)]
    while pending:
        parent, is_left = pending.pop()
        node = len(feature)
        if parent >= 0:
            (left if is_left else right)[parent] = node
        tag = data[pos] if pos < len(data) else None
        if tag == 0:
            _, v = _LEAF.unpack_from(data, pos)
            pos += _LEAF.size
            feature.append(-1)
            threshold.append(0.0)
            value.append(v)
        elif tag == 1:
            _, f, thr = _SPLIT.unpack_from(data, pos)
            pos += _SPLIT.size
            if f >= n_features:
                raise CorruptFileError(f"split on feature {f} >= {n_features}")
            feature.append(f)
            threshold.append(thr)
            value.append(0.0)
            pending.append((node, False))
            pending.append((node, True))
        else:
            raise CorruptFileError(f"bad node tag at byte {pos}")
        left.append(-1)
        right.append(-1)
    return (
        Tree(
            np.array(feature, dtype=np.int64),
            np.array(threshold, dtype=np.float64),
            np.array(left, dtype=np.int64),
            np.array(right, dtype=np.int64),
            np.array(value, dtype=np.float64),
        ),
        pos,
    )
