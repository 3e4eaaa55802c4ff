"""Random forests and second-order gradient boosting over a shared ensemble format."""
from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

from ..errors import DegenerateLabels, SchemaError
from .tree import DecisionTree, TreeBuilder, best_split

MODEL_FORMAT = "voxscreen-model/1"
FOREST, BOOSTED = "forest", "boosted"


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-np.asarray(z, dtype=np.float64)))


@dataclass
class TreeEnsemble:
    trees: list[DecisionTree]
    tree_weights: np.ndarray
    base_score: float
    kind: str
    feature_names: tuple[str, ...]
    extra: dict = field(default_factory=dict)

    def __post_init__(self):
        self.tree_weights = np.asarray(self.tree_weights, dtype=np.float64)
        self.feature_names = tuple(self.feature_names)
        if len(self.trees) != self.tree_weights.shape[0]:
            raise SchemaError("one weight per tree required")
        if self.kind not in (FOREST, BOOSTED):
            raise SchemaError(f"unknown ensemble kind {self.kind!r}")

    @property
    def n_features(self) -> int:
        return len(self.feature_names)

    @property
    def output_weights(self) -> np.ndarray:
        """Multiplier applied to each tree's output in the margin (forest: averaged)."""
        if self.kind == FOREST:
            return self.tree_weights / len(self.trees)
        return self.tree_weights

    def _check(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.n_features:
            raise SchemaError(f"expected {self.n_features} features, got {X.shape[1]}")
        return X

    def margin(self, X) -> np.ndarray:
        """Raw model output: mean leaf fraction (forest) or log-odds (boosted)."""
        X = self._check(X)
        out = np.full(X.shape[0], self.base_score)
        for w, tree in zip(self.output_weights, self.trees):
            out += w * tree.predict(X)
        return out

    def predict_proba(self, X) -> np.ndarray:
        m = self.margin(X)
        return m if self.kind == FOREST else sigmoid(m)

    def to_dict(self) -> dict:
        d = {
            "format": MODEL_FORMAT,
            "kind": self.kind,
            "base_score": float(self.base_score),
            "feature_names": list(self.feature_names),
            "tree_weights": [float(w) for w in self.tree_weights],
            "trees": [t.to_dict() for t in self.trees],
        }
        d.update(self.extra)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":")) + "\n"

    def fingerprint(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()

    @classmethod
    def from_dict(cls, d: dict) -> "TreeEnsemble":
        if d.get("format") != MODEL_FORMAT:
            raise SchemaError(f"unsupported model format {d.get('format')!r}")
        core = {"format", "kind", "base_score", "feature_names", "tree_weights", "trees"}
        return cls([DecisionTree.from_dict(t) for t in d["trees"]], d["tree_weights"], float(d["base_score"]),
                   d["kind"], d["feature_names"], {k: v for k, v in d.items() if k not in core})

    @classmethod
    def from_json(cls, text: str) -> "TreeEnsemble":
        return cls.from_dict(json.loads(text))


def save_model(model: TreeEnsemble, path: str | Path) -> None:
    Path(path).write_text(model.to_json(), encoding="utf-8")


def load_model(path: str | Path) -> TreeEnsemble:
    return TreeEnsemble.from_json(Path(path).read_text(encoding="utf-8"))


def predict_proba(model: TreeEnsemble, x) -> float | np.ndarray:
    """Probability of the positive class for one row (scalar) or a matrix (array)."""
    x = np.asarray(x, dtype=np.float64)
    p = model.predict_proba(x)
    return float(p[0]) if x.ndim == 1 else p


@dataclass(frozen=True)
class ForestConfig:
    n_trees: int = 200
    max_depth: int = 8
    mtry: int | None = None  # None: floor(sqrt(p))
    min_leaf: int = 2
    seed: int = 42


@dataclass(frozen=True)
class BoostConfig:
    n_rounds: int = 300
    max_depth: int = 4
    learning_rate: float = 0.1
    reg_lambda: float = 1.0
    min_child_weight: float = 1.0
    seed: int = 42


def _check_training(X, y) -> tuple[np.ndarray, np.ndarray]:
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y)
    if X.ndim != 2 or X.shape[0] != y.shape[0]:
        raise SchemaError("X must be 2-D with one label per row")
    if X.shape[0] < 2:
        raise DegenerateLabels("need at least two training rows")
    if not np.all(np.isfinite(X)):
        raise SchemaError("training features must be finite (impute missing values first)")
    if not set(np.unique(y)) <= {0, 1}:
        raise SchemaError("labels must be 0/1")
    if np.unique(y).size < 2:
        raise DegenerateLabels("training labels contain a single class")
    return X, y.astype(np.float64)


def _names(feature_names, p) -> tuple[str, ...]:
    return tuple(feature_names) if feature_names is not None else tuple(f"f{i}" for i in range(p))


def gini_score(y: np.ndarray, min_leaf: int):
    """Split scorer: Gini impurity decrease (count-weighted) for 0/1 labels."""

    def score(order):
        ys = y[order]
        n = ys.shape[0]
        pos_left = np.cumsum(ys, axis=0)[:-1]
        n_left = np.arange(1, n)[:, None].astype(np.float64)
        n_right = n - n_left
        pos_total = ys.sum(axis=0)[None, :]
        pos_right = pos_total - pos_left
        parent = n * (1.0 - (pos_total / n) ** 2 - (1 - pos_total / n) ** 2)
        gl = n_left * (1.0 - (pos_left / n_left) ** 2 - (1 - pos_left / n_left) ** 2)
        gr = n_right * (1.0 - (pos_right / n_right) ** 2 - (1 - pos_right / n_right) ** 2)
        return (parent - gl - gr) / n

    def valid(order):
        n = order.shape[0]
        n_left = np.arange(1, n)[:, None]
        ok = (n_left >= min_leaf) & (n - n_left >= min_leaf)
        return np.broadcast_to(ok, (n - 1, order.shape[1]))

    return score, valid


def train_forest(X, y, cfg: ForestConfig | None = None, feature_names: Sequence[str] | None = None) -> TreeEnsemble:
    """Bootstrap-aggregated Gini trees with per-split feature subsampling.

    Leaves hold the class-1 fraction; the ensemble predicts their mean.
    Each tree draws from its own child of ``SeedSequence(seed)``, so the
    result does not depend on the order trees are built in.
    """
    cfg = cfg or ForestConfig()
    X, y = _check_training(X, y)
    n, p = X.shape
    mtry = cfg.mtry or max(1, int(np.floor(np.sqrt(p))))
    mtry = min(mtry, p)
    trees = []
    for child in np.random.SeedSequence(cfg.seed).spawn(cfg.n_trees):
        rng = np.random.default_rng(child)
        sample = rng.integers(n, size=n)
        Xb, yb = X[sample], y[sample]

        def find_split(Xn, rows, _yb=yb, _rng=rng):
            if np.all(_yb[rows] == _yb[rows][0]):
                return None
            feats = np.sort(_rng.choice(p, size=mtry, replace=False))
            score, valid = gini_score(_yb[rows], cfg.min_leaf)
            return best_split(Xn, score, valid, feats)

        def leaf_value(rows, _yb=yb):
            return float(_yb[rows].mean())

        trees.append(TreeBuilder(cfg.max_depth, find_split, leaf_value).build(Xb))
    return TreeEnsemble(trees, np.ones(len(trees)), 0.0, FOREST, _names(feature_names, p),
                        {"config": {"kind": FOREST, **cfg.__dict__}})


def newton_leaf(G: float, H: float, reg_lambda: float) -> float:
    return -G / (H + reg_lambda)


def newton_score(g: np.ndarray, h: np.ndarray, reg_lambda: float, min_child_weight: float):
    """Split scorer: second-order gain 1/2 [GL^2/(HL+l) + GR^2/(HR+l) - G^2/(H+l)]."""

    def score(order):
        gs, hs = g[order], h[order]
        GL = np.cumsum(gs, axis=0)[:-1]
        HL = np.cumsum(hs, axis=0)[:-1]
        G, H = gs.sum(axis=0), hs.sum(axis=0)
        GR, HR = G - GL, H - HL
        return 0.5 * (GL ** 2 / (HL + reg_lambda) + GR ** 2 / (HR + reg_lambda) - G ** 2 / (H + reg_lambda))

    def valid(order):
        hs = h[order]
        HL = np.cumsum(hs, axis=0)[:-1]
        HR = hs.sum(axis=0) - HL
        return (HL >= min_child_weight) & (HR >= min_child_weight)

    return score, valid


def logistic_loss(y: np.ndarray, margin: np.ndarray) -> float:
    return float(np.mean(np.logaddexp(0.0, margin) - y * margin))


def train_boosted(X, y, cfg: BoostConfig | None = None, feature_names: Sequence[str] | None = None,
                  loss_trace: list | None = None) -> TreeEnsemble:
    """Gradient-boosted regression trees on the logistic loss (Newton leaves, L2 penalty).

    ``loss_trace``, when given, receives the training loss after every round.
    """
    cfg = cfg or BoostConfig()
    X, y = _check_training(X, y)
    n, p = X.shape
    prior = y.mean()
    base = float(np.log(prior / (1.0 - prior)))
    margin = np.full(n, base)
    trees = []
    for _ in range(cfg.n_rounds):
        prob = sigmoid(margin)
        g = prob - y
        h = prob * (1.0 - prob)

        def find_split(Xn, rows, _g=g, _h=h):
            score, valid = newton_score(_g[rows], _h[rows], cfg.reg_lambda, cfg.min_child_weight)
            return best_split(Xn, score, valid)

        def leaf_value(rows, _g=g, _h=h):
            return newton_leaf(float(_g[rows].sum()), float(_h[rows].sum()), cfg.reg_lambda)

        tree = TreeBuilder(cfg.max_depth, find_split, leaf_value).build(X)
        trees.append(tree)
        margin = margin + cfg.learning_rate * tree.predict(X)
        if loss_trace is not None:
            loss_trace.append(logistic_loss(y, margin))
    return TreeEnsemble(trees, np.full(len(trees), cfg.learning_rate), base, BOOSTED, _names(feature_names, p),
                        {"config": {"kind": BOOSTED, **cfg.__dict__}})
