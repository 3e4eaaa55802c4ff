"""Labelled feature matrices: assembly, CSV persistence, correlation pruning and SMOTE."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np
from sklearn.base import BaseEstimator, TransformerMixin
from sklearn.utils.validation import check_array, check_is_fitted

from .errors import CannotOversample, ParseError, SchemaError
from .features.classic import MISSING
from .features.names import CANONICAL_FEATURES

META_COLUMNS = ("id", "label", "gender", "age", "environment", "country")
LABELS = {"PD": 1, "non-PD": 0}
GENDERS = ("male", "female", "unspecified")
ENVIRONMENTS = ("home", "lab")


@dataclass(frozen=True)
class RecordMeta:
    id: str
    label: str
    gender: str = "unspecified"
    age: float = math.nan
    environment: str = "home"
    country: str = ""
    synthetic: bool = False

    def __post_init__(self):
        if self.label not in LABELS:
            raise SchemaError(f"{self.id}: label must be 'PD' or 'non-PD', got {self.label!r}")
        if self.gender not in GENDERS:
            raise SchemaError(f"{self.id}: gender must be one of {GENDERS}, got {self.gender!r}")
        if self.environment not in ENVIRONMENTS:
            raise SchemaError(f"{self.id}: environment must be 'home' or 'lab', got {self.environment!r}")
        if not math.isnan(self.age) and self.age < 0:
            raise SchemaError(f"{self.id}: negative age")

    @property
    def y(self) -> int:
        return LABELS[self.label]


@dataclass(frozen=True)
class FeatureMatrix:
    """Rows of named feature values (NaN = missing) with per-row metadata."""

    feature_names: tuple[str, ...]
    values: np.ndarray
    meta: tuple[RecordMeta, ...] = field(default=())

    def __post_init__(self):
        names = tuple(self.feature_names)
        values = np.asarray(self.values, dtype=np.float64)
        if values.ndim != 2 or values.shape[1] != len(names):
            raise SchemaError(f"values shape {values.shape} does not match {len(names)} feature names")
        if len(set(names)) != len(names):
            raise SchemaError("duplicate feature names")
        meta = tuple(self.meta)
        if len(meta) != values.shape[0]:
            raise SchemaError("one RecordMeta per row required")
        ids = [m.id for m in meta]
        if len(set(ids)) != len(ids):
            raise SchemaError("duplicate record ids")
        object.__setattr__(self, "feature_names", names)
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "meta", meta)

    @property
    def n_rows(self) -> int:
        return self.values.shape[0]

    def __len__(self):
        return self.n_rows

    @property
    def y(self) -> np.ndarray:
        return np.array([m.y for m in self.meta], dtype=np.int64)

    @property
    def ids(self) -> list[str]:
        return [m.id for m in self.meta]

    def rows(self, index) -> "FeatureMatrix":
        index = np.asarray(index)
        if index.dtype == bool:
            index = np.flatnonzero(index)
        return FeatureMatrix(self.feature_names, self.values[index], tuple(self.meta[i] for i in index))

    def columns(self, names: Sequence[str]) -> "FeatureMatrix":
        pos = {n: i for i, n in enumerate(self.feature_names)}
        missing = [n for n in names if n not in pos]
        if missing:
            raise SchemaError(f"unknown features: {missing}")
        return FeatureMatrix(tuple(names), self.values[:, [pos[n] for n in names]], self.meta)

    def with_values(self, values: np.ndarray) -> "FeatureMatrix":
        return FeatureMatrix(self.feature_names, values, self.meta)

    def equals(self, other: "FeatureMatrix") -> bool:
        return (self.feature_names == other.feature_names and len(self.meta) == len(other.meta)
                and all(_same_meta(a, b) for a, b in zip(self.meta, other.meta))
                and np.array_equal(self.values, other.values, equal_nan=True))


def _same_meta(a: RecordMeta, b: RecordMeta) -> bool:
    """Field equality with missing ages treated as equal."""
    both_missing = math.isnan(a.age) and math.isnan(b.age)
    return (both_missing or a.age == b.age) and replace(a, age=0.0) == replace(b, age=0.0)


def assemble(classic: dict, nonlinear: dict, names: Sequence[str] = CANONICAL_FEATURES) -> np.ndarray:
    """One row in ``names`` order; absent features become the missing sentinel."""
    merged = {**classic, **nonlinear}
    return np.array([merged.get(n, MISSING) for n in names], dtype=np.float64)


# ---------------------------------------------------------------- CSV

def _fmt(value: float) -> str:
    return "" if math.isnan(value) else format(value, ".17g")


def save_csv(m: FeatureMatrix, path: str | Path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(META_COLUMNS + m.feature_names)
        for meta, row in zip(m.meta, m.values):
            writer.writerow([meta.id, meta.label, meta.gender, _fmt(float(meta.age)), meta.environment,
                             meta.country] + [_fmt(v) for v in row])


def _number(cell: str, where: str) -> float:
    cell = cell.strip()
    if cell == "":
        return MISSING
    try:
        value = float(cell)
    except ValueError:
        raise ParseError(f"{where}: non-numeric cell {cell!r}") from None
    return value


def load_csv(path: str | Path) -> FeatureMatrix:
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SchemaError(f"{path}: empty file") from None
        if tuple(header[:len(META_COLUMNS)]) != META_COLUMNS:
            raise SchemaError(f"{path}: header must start with {','.join(META_COLUMNS)}")
        names = tuple(header[len(META_COLUMNS):])
        meta, values = [], []
        for lineno, cells in enumerate(reader, start=2):
            if not cells:
                continue
            if len(cells) != len(header):
                raise SchemaError(f"{path}:{lineno}: expected {len(header)} cells, got {len(cells)}")
            rid, label, gender, age, env, country = cells[:6]
            meta.append(RecordMeta(rid, label, gender or "unspecified", _number(age, f"{path}:{lineno}"),
                                   env or "home", country))
            values.append([_number(c, f"{path}:{lineno}") for c in cells[6:]])
    arr = np.array(values, dtype=np.float64).reshape(len(values), len(names))
    return FeatureMatrix(names, arr, tuple(meta))


# ---------------------------------------------------------------- pruning

def pairwise_correlation(X: np.ndarray) -> np.ndarray:
    """Pearson r over pairwise-complete rows; undefined (constant) pairs give 0."""
    X = np.asarray(X, dtype=np.float64)
    p = X.shape[1]
    present = ~np.isnan(X)
    corr = np.eye(p)
    for i in range(p):
        for j in range(i + 1, p):
            ok = present[:, i] & present[:, j]
            r = 0.0
            if ok.sum() >= 2:
                a = X[ok, i] - X[ok, i].mean()
                b = X[ok, j] - X[ok, j].mean()
                denom = math.sqrt(float(a @ a) * float(b @ b))
                if denom > 0:
                    r = float(a @ b) / denom
            corr[i, j] = corr[j, i] = r
    return corr


def correlated_drops(X: np.ndarray, threshold: float = 0.9) -> np.ndarray:
    """Boolean mask of columns to drop: scan pairs (i<j) in column order, drop j when |r| > threshold."""
    if not 0 < threshold <= 1:
        raise ValueError("threshold must lie in (0, 1]")
    corr = np.abs(pairwise_correlation(X))
    p = corr.shape[0]
    dropped = np.zeros(p, dtype=bool)
    for i in range(p):
        if dropped[i]:
            continue
        for j in range(i + 1, p):
            if not dropped[j] and corr[i, j] > threshold:
                dropped[j] = True
    return dropped


def prune_correlated(m: FeatureMatrix, threshold: float = 0.9) -> tuple[FeatureMatrix, list[str]]:
    if m.n_rows < 2:
        raise ValueError("need at least two rows to estimate correlations")
    dropped = correlated_drops(m.values, threshold)
    keep = [n for n, d in zip(m.feature_names, dropped) if not d]
    return m.columns(keep), [n for n, d in zip(m.feature_names, dropped) if d]


class CorrelationPruner(TransformerMixin, BaseEstimator):
    """Drop the later feature of every pair with |Pearson r| above ``threshold``."""

    def __init__(self, threshold=0.9):
        self.threshold = threshold

    def fit(self, X, y=None):
        X = check_array(X, ensure_all_finite="allow-nan", ensure_min_samples=2)
        self.n_features_in_ = X.shape[1]
        self.support_ = ~correlated_drops(X, self.threshold)
        return self

    def transform(self, X):
        check_is_fitted(self, "support_")
        X = check_array(X, ensure_all_finite="allow-nan")
        return X[:, self.support_]

    def get_feature_names_out(self, input_features=None):
        check_is_fitted(self, "support_")
        if input_features is None:
            input_features = [f"x{i}" for i in range(self.n_features_in_)]
        return np.asarray(input_features, dtype=object)[self.support_]


# ---------------------------------------------------------------- preprocessing

def column_medians(X: np.ndarray) -> np.ndarray:
    """Per-column median of present values (0 for all-missing columns)."""
    out = np.zeros(X.shape[1])
    for j in range(X.shape[1]):
        col = X[:, j]
        col = col[~np.isnan(col)]
        if col.size:
            out[j] = np.median(col)
    return out


def impute(X: np.ndarray, medians: np.ndarray) -> np.ndarray:
    X = np.array(X, dtype=np.float64, copy=True)
    rows, cols = np.nonzero(np.isnan(X))
    X[rows, cols] = medians[cols]
    return X


def zscore_params(X: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    mean = X.mean(axis=0)
    scale = X.std(axis=0)
    scale[scale == 0] = 1.0
    return mean, scale


# ---------------------------------------------------------------- SMOTE

class SMOTE(BaseEstimator):
    """Synthetic minority oversampling by interpolation towards nearest minority neighbours.

    Neighbours are found in z-scored space (so Hz-scale columns do not
    dominate); new points are interpolated in the original space, which is
    the same point because interpolation commutes with affine scaling.
    ``k_neighbors`` is capped at minority size - 1.
    """

    def __init__(self, k_neighbors=5, random_state=None):
        self.k_neighbors = k_neighbors
        self.random_state = random_state

    def fit_resample(self, X, y):
        X = check_array(X, dtype=np.float64)
        y = np.asarray(y)
        classes, counts = np.unique(y, return_counts=True)
        if classes.size < 2 or counts.min() == counts.max():
            self.sample_origin_ = np.full(0, -1)
            return X.copy(), y.copy()
        minority = classes[np.argmin(counts)]
        n_new = int(counts.max() - counts.min())
        idx = np.flatnonzero(y == minority)
        if idx.size < 2:
            raise CannotOversample("minority class needs at least two rows")
        if self.k_neighbors < 1:
            raise ValueError("k_neighbors must be >= 1")
        k = min(self.k_neighbors, idx.size - 1)
        mean, scale = zscore_params(X)
        Z = (X[idx] - mean) / scale
        d2 = ((Z[:, None, :] - Z[None, :, :]) ** 2).sum(axis=2)
        np.fill_diagonal(d2, np.inf)
        neighbours = np.argsort(d2, axis=1, kind="stable")[:, :k]
        rng = np.random.default_rng(self.random_state)
        base = rng.integers(idx.size, size=n_new)
        pick = neighbours[base, rng.integers(k, size=n_new)]
        gap = rng.random(n_new)[:, None]
        P, Q = X[idx[base]], X[idx[pick]]
        synthetic = P + gap * (Q - P)
        self.sample_origin_ = idx[base]
        return np.vstack([X, synthetic]), np.concatenate([y, np.full(n_new, minority)])


def smote(m: FeatureMatrix, k: int = 5, seed: int | None = None) -> FeatureMatrix:
    """Balance classes with SMOTE; missing values are median-imputed first.

    Synthetic rows carry their base row's metadata with ``synthetic=True``
    and an id suffixed ``#synN``.
    """
    X = impute(m.values, column_medians(m.values))
    sampler = SMOTE(k_neighbors=k, random_state=seed)
    Xr, _ = sampler.fit_resample(X, m.y)
    if Xr.shape[0] == m.n_rows:
        return m
    extra = tuple(replace(m.meta[o], id=f"{m.meta[o].id}#syn{i}", synthetic=True)
                  for i, o in enumerate(sampler.sample_origin_))
    values = np.vstack([m.values, Xr[m.n_rows:]])
    return FeatureMatrix(m.feature_names, values, m.meta + extra)


def from_rows(names: Sequence[str], rows: Iterable[np.ndarray], meta: Iterable[RecordMeta]) -> FeatureMatrix:
    rows = list(rows)
    values = np.vstack(rows) if rows else np.empty((0, len(names)))
    return FeatureMatrix(tuple(names), values, tuple(meta))
