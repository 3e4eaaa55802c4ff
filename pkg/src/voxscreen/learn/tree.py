"""Binary decision trees with cover bookkeeping and exact greedy split search."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

LEAF = -1


@dataclass
class DecisionTree:
    """Flattened tree in pre-order; node 0 is the root.

    Internal nodes send ``x[feature] < threshold`` left. ``cover`` is the
    number of training samples (with bootstrap multiplicity) reaching a node.
    """

    feature: np.ndarray
    threshold: np.ndarray
    left: np.ndarray
    right: np.ndarray
    value: np.ndarray
    cover: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.feature.shape[0]

    def is_leaf(self, node: int) -> bool:
        return self.feature[node] == LEAF

    @property
    def depth(self) -> int:
        depth = np.zeros(self.n_nodes, dtype=int)
        for node in range(self.n_nodes):
            if not self.is_leaf(node):
                depth[self.left[node]] = depth[self.right[node]] = depth[node] + 1
        return int(depth.max())

    def apply(self, X: np.ndarray) -> np.ndarray:
        """Leaf index reached by every row of ``X``."""
        X = np.atleast_2d(X)
        node = np.zeros(X.shape[0], dtype=np.int64)
        active = self.feature[node] != LEAF
        while active.any():
            rows = np.flatnonzero(active)
            cur = node[rows]
            go_left = X[rows, self.feature[cur]] < self.threshold[cur]
            node[rows] = np.where(go_left, self.left[cur], self.right[cur])
            active = self.feature[node] != LEAF
        return node

    def predict(self, X: np.ndarray) -> np.ndarray:
        return self.value[self.apply(X)]

    def to_dict(self) -> dict:
        return {
            "feature": self.feature.tolist(),
            "threshold": [float(t) for t in self.threshold],
            "left": self.left.tolist(),
            "right": self.right.tolist(),
            "value": [float(v) for v in self.value],
            "cover": [float(c) for c in self.cover],
        }

    @classmethod
    def from_dict(cls, d: dict) -> "DecisionTree":
        return cls(
            np.asarray(d["feature"], dtype=np.int64),
            np.asarray(d["threshold"], dtype=np.float64),
            np.asarray(d["left"], dtype=np.int64),
            np.asarray(d["right"], dtype=np.int64),
            np.asarray(d["value"], dtype=np.float64),
            np.asarray(d["cover"], dtype=np.float64),
        )

    @classmethod
    def leaf(cls, value: float, cover: float = 1.0) -> "DecisionTree":
        return cls(np.array([LEAF]), np.zeros(1), np.array([LEAF]), np.array([LEAF]),
                   np.array([float(value)]), np.array([float(cover)]))


@dataclass
class Split:
    feature: int
    threshold: float
    gain: float


def best_split(X: np.ndarray, score: Callable[[np.ndarray, np.ndarray], np.ndarray],
               valid_extra: Callable[[np.ndarray], np.ndarray] | None = None,
               features: np.ndarray | None = None) -> Split | None:
    """Exact greedy search over midpoints of sorted distinct values.

    ``score(order, ...)`` receives the per-feature sort order (n x p) and
    returns the (n-1) x p gain of splitting after each sorted position.
    Ties go to the lowest feature index, then the lowest threshold.
    """
    if features is not None:
        X = X[:, features]
    n = X.shape[0]
    if n < 2:
        return None
    order = np.argsort(X, axis=0, kind="stable")
    xs = np.take_along_axis(X, order, axis=0)
    gain = score(order)
    valid = xs[1:] > xs[:-1]
    if valid_extra is not None:
        valid &= valid_extra(order)
    gain = np.where(valid, gain, -np.inf)
    flat = gain.T.ravel()
    best = int(np.argmax(flat))
    if not np.isfinite(flat[best]) or flat[best] <= 0:
        return None
    f, pos = divmod(best, n - 1)
    lo, hi = xs[pos, f], xs[pos + 1, f]
    thr = 0.5 * (lo + hi)
    if thr <= lo:
        thr = hi
    feature = int(features[f]) if features is not None else f
    return Split(feature, float(thr), float(flat[best]))


class TreeBuilder:
    """Depth-first pre-order tree growth driven by a split finder and a leaf valuer."""

    def __init__(self, max_depth: int, find_split, leaf_value, node_value=None):
        self.max_depth = max_depth
        self.find_split = find_split
        self.leaf_value = leaf_value
        self.node_value = node_value or leaf_value

    def build(self, X: np.ndarray, rows: np.ndarray | None = None) -> DecisionTree:
        self._nodes: list[list] = []
        rows = np.arange(X.shape[0]) if rows is None else rows
        self._grow(X, rows, 0)
        feature, threshold, left, right, value, cover = map(list, zip(*self._nodes))
        return DecisionTree(np.array(feature, dtype=np.int64), np.array(threshold, dtype=np.float64),
                            np.array(left, dtype=np.int64), np.array(right, dtype=np.int64),
                            np.array(value, dtype=np.float64), np.array(cover, dtype=np.float64))

    def _grow(self, X, rows, depth) -> int:
        node = len(self._nodes)
        self._nodes.append([LEAF, 0.0, LEAF, LEAF, 0.0, float(rows.shape[0])])
        split = self.find_split(X[rows], rows) if depth < self.max_depth else None
        if split is None:
            self._nodes[node][4] = self.leaf_value(rows)
            return node
        go_left = X[rows, split.feature] < split.threshold
        self._nodes[node][0] = split.feature
        self._nodes[node][1] = split.threshold
        self._nodes[node][4] = self.node_value(rows)
        self._nodes[node][2] = self._grow(X, rows[go_left], depth + 1)
        self._nodes[node][3] = self._grow(X, rows[~go_left], depth + 1)
        return node
