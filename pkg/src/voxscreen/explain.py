"""Exact Shapley attributions for tree ensembles and importance summaries."""
from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np

from .dataset import FeatureMatrix
from .errors import ModelUnsupported, TooLarge
from .evaluate import TrainerConfig, evaluate
from .learn.ensemble import TreeEnsemble
from .learn.tree import DecisionTree

MAX_BRUTE_FORCE_FEATURES = 15


@dataclass
class ShapAttribution:
    base_value: float
    phi: np.ndarray
    instance_id: str = ""

    @property
    def output(self) -> float:
        return self.base_value + float(self.phi.sum())


def _check_covers(model: TreeEnsemble) -> None:
    for t, tree in enumerate(model.trees):
        cover = getattr(tree, "cover", None)
        if cover is None or cover.shape[0] != tree.n_nodes or not np.all(np.isfinite(cover)) or cover[0] <= 0:
            raise ModelUnsupported(f"tree {t} lacks usable cover counts")


def expected_value(tree: DecisionTree) -> float:
    """Cover-weighted mean of the leaf values."""
    leaves = tree.feature < 0
    return float((tree.cover[leaves] * tree.value[leaves]).sum() / tree.cover[0])


# Path-dependent TreeSHAP. A path entry is [feature, zero_fraction, one_fraction, weight].

def _extend(path, depth, zero, one, feature):
    path[depth] = [feature, zero, one, 1.0 if depth == 0 else 0.0]
    for i in range(depth - 1, -1, -1):
        path[i + 1][3] += one * path[i][3] * (i + 1) / (depth + 1)
        path[i][3] = zero * path[i][3] * (depth - i) / (depth + 1)


def _unwind(path, depth, index):
    one, zero = path[index][2], path[index][1]
    next_one = path[depth][3]
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = path[i][3]
            path[i][3] = next_one * (depth + 1) / ((i + 1) * one)
            next_one = tmp - path[i][3] * zero * (depth - i) / (depth + 1)
        else:
            path[i][3] = path[i][3] * (depth + 1) / (zero * (depth - i))
    for i in range(index, depth):
        path[i][0], path[i][1], path[i][2] = path[i + 1][0], path[i + 1][1], path[i + 1][2]


def _unwound_sum(path, depth, index):
    one, zero = path[index][2], path[index][1]
    next_one = path[depth][3]
    total = 0.0
    for i in range(depth - 1, -1, -1):
        if one != 0:
            tmp = next_one * (depth + 1) / ((i + 1) * one)
            total += tmp
            next_one = path[i][3] - tmp * zero * (depth - i) / (depth + 1)
        else:
            total += path[i][3] / (zero * (depth - i) / (depth + 1))
    return total


def _tree_shap(tree: DecisionTree, x: np.ndarray, phi: np.ndarray, scale: float) -> None:
    max_depth = tree.depth + 2
    feat, thr, left, right = tree.feature, tree.threshold, tree.left, tree.right
    value, cover = tree.value, tree.cover

    def recurse(node, parent_path, depth, zero, one, feature):
        path = [e[:] for e in parent_path[:depth]] + [[0, 0.0, 0.0, 0.0] for _ in range(max_depth - depth)]
        _extend(path, depth, zero, one, feature)
        if feat[node] < 0:
            for i in range(1, depth + 1):
                w = _unwound_sum(path, depth, i)
                phi[path[i][0]] += scale * w * (path[i][2] - path[i][1]) * value[node]
            return
        split = feat[node]
        hot, cold = (left[node], right[node]) if x[split] < thr[node] else (right[node], left[node])
        incoming_zero = incoming_one = 1.0
        k = next((i for i in range(depth + 1) if path[i][0] == split), None)
        if k is not None:
            incoming_zero, incoming_one = path[k][1], path[k][2]
            _unwind(path, depth, k)
            depth -= 1
        recurse(hot, path, depth + 1, cover[hot] / cover[node] * incoming_zero, incoming_one, split)
        recurse(cold, path, depth + 1, cover[cold] / cover[node] * incoming_zero, 0.0, split)

    recurse(0, [], 0, 1.0, 1.0, -1)


def base_value(model: TreeEnsemble) -> float:
    return float(model.base_score + sum(w * expected_value(t) for w, t in zip(model.output_weights, model.trees)))


def tree_shap(model: TreeEnsemble, x, instance_id: str = "") -> ShapAttribution:
    """Path-dependent TreeSHAP over the ensemble margin.

    The margin is the log-odds for boosted models and the mean leaf
    fraction for forests; ``base_value + phi.sum()`` reproduces it.
    """
    _check_covers(model)
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (model.n_features,):
        raise ValueError(f"expected a row of {model.n_features} features")
    phi = np.zeros(model.n_features)
    for w, tree in zip(model.output_weights, model.trees):
        _tree_shap(tree, x, phi, w)
    return ShapAttribution(base_value(model), phi, instance_id)


def conditional_expectation(tree: DecisionTree, x: np.ndarray, known: frozenset | set) -> float:
    """E[f(X) | X_S = x_S] under cover-weighted traversal of unknown splits."""

    def walk(node):
        if tree.feature[node] < 0:
            return tree.value[node]
        f = tree.feature[node]
        if f in known:
            return walk(tree.left[node] if x[f] < tree.threshold[node] else tree.right[node])
        l, r = tree.left[node], tree.right[node]
        return (tree.cover[l] * walk(l) + tree.cover[r] * walk(r)) / tree.cover[node]

    return float(walk(0))


def brute_force_shap(model: TreeEnsemble, x, instance_id: str = "") -> ShapAttribution:
    """Shapley values by enumerating every coalition (reference oracle, p <= 15)."""
    _check_covers(model)
    p = model.n_features
    if p > MAX_BRUTE_FORCE_FEATURES:
        raise TooLarge(f"{p} features exceeds the {MAX_BRUTE_FORCE_FEATURES}-feature enumeration limit")
    x = np.asarray(x, dtype=np.float64)
    weights = model.output_weights
    values = np.empty(1 << p)
    for mask in range(1 << p):
        known = frozenset(i for i in range(p) if mask >> i & 1)
        values[mask] = model.base_score + sum(
            w * conditional_expectation(t, x, known) for w, t in zip(weights, model.trees))
    coef = [math.factorial(s) * math.factorial(p - s - 1) / math.factorial(p) for s in range(p)]
    phi = np.zeros(p)
    for i in range(p):
        bit = 1 << i
        for mask in range(1 << p):
            if not mask & bit:
                phi[i] += coef[bin(mask).count("1")] * (values[mask | bit] - values[mask])
    return ShapAttribution(float(values[0]), phi, instance_id)


class TreeExplainer:
    """Batch TreeSHAP for a fitted ensemble (or estimator exposing ``ensemble_``)."""

    def __init__(self, model):
        self.model = getattr(model, "ensemble_", model)
        _check_covers(self.model)
        self.expected_value = base_value(self.model)

    def shap_values(self, X) -> np.ndarray:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        return np.vstack([tree_shap(self.model, row).phi for row in X])

    def explain(self, X, ids: Sequence[str] | None = None) -> list[ShapAttribution]:
        X = np.atleast_2d(np.asarray(X, dtype=np.float64))
        ids = ids if ids is not None else [str(i) for i in range(X.shape[0])]
        return [tree_shap(self.model, row, rid) for row, rid in zip(X, ids)]


@dataclass
class GlobalImportance:
    names: list[str]
    mean_abs_phi: list[float]

    def top(self, k: int) -> list[str]:
        return self.names[:k]

    def to_dict(self) -> dict:
        return {"format": "importance/1",
                "ranking": [{"feature": n, "mean_abs_phi": v} for n, v in zip(self.names, self.mean_abs_phi)]}


def global_importance(attributions: Sequence[ShapAttribution], feature_names: Sequence[str]) -> GlobalImportance:
    """Mean |phi| per feature, largest first; ties broken by feature name."""
    if not attributions:
        raise ValueError("no attributions to aggregate")
    phi = np.vstack([a.phi for a in attributions])
    if phi.shape[1] != len(feature_names):
        raise ValueError("attribution width does not match feature names")
    means = np.abs(phi).mean(axis=0)
    order = sorted(range(len(feature_names)), key=lambda j: (-means[j], feature_names[j]))
    return GlobalImportance([feature_names[j] for j in order], [float(means[j]) for j in order])


def moving_average3(values: Sequence[float]) -> list[float]:
    """Centred 3-point moving average; the end points average their two available values."""
    v = list(values)
    return [float(np.mean(v[max(0, i - 1): i + 2])) for i in range(len(v))]


def shap_validation_curve(m: FeatureMatrix, ranking: GlobalImportance, trainer: TrainerConfig, seed: int = 42,
                          max_k: int = 20, ks: Sequence[int] | None = None, n_jobs: int = 1) -> list[dict]:
    """LOOCV metrics of models restricted to the top-k ranked features.

    Selected columns keep their original matrix order, so k equal to the
    full feature count reproduces the full-model evaluation exactly.
    """
    missing = set(m.feature_names) - set(ranking.names)
    if missing:
        raise ValueError(f"ranking does not cover features: {sorted(missing)}")
    k_cap = min(max_k, len(m.feature_names))
    ks = list(range(1, k_cap + 1)) if ks is None else sorted({min(k, len(m.feature_names)) for k in ks})
    curve = []
    for k in ks:
        chosen = set(ranking.names[:k])
        sub = m.columns([n for n in m.feature_names if n in chosen])
        report = evaluate(sub, trainer, seed, n_jobs=n_jobs)
        curve.append({"k": k, "auc": report.auc, "accuracy": report.accuracy})
    for point, ma in zip(curve, moving_average3([c["auc"] for c in curve])):
        point["auc_ma3"] = ma
    return curve


def write_attributions_csv(attributions: Sequence[ShapAttribution], feature_names: Sequence[str],
                           path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "base_value", *feature_names])
        for a in attributions:
            writer.writerow([a.instance_id, format(a.base_value, ".17g"), *(format(v, ".17g") for v in a.phi)])


def write_curve(curve: Sequence[dict], json_path: str | Path, tsv_path: str | Path, extra: dict | None = None) -> None:
    doc = {"format": "validation-curve/1", "curve": list(curve), **(extra or {})}
    Path(json_path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    with open(tsv_path, "w", encoding="utf-8") as fh:
        fh.write("k\tauc\taccuracy\tauc_ma3\n")
        for c in curve:
            fh.write(f"{c['k']}\t{c['auc']!r}\t{c['accuracy']!r}\t{c['auc_ma3']!r}\n")
