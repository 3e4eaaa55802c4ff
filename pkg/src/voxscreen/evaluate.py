"""Leave-one-out evaluation, metrics, stratified analysis and ablations."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Sequence

import numpy as np
from scipy.stats import rankdata

from .dataset import FeatureMatrix, column_medians, impute, smote
from .errors import FoldDegenerate, NoOp, Undefined
from .learn.ensemble import BOOSTED, FOREST, BoostConfig, ForestConfig, TreeEnsemble, train_boosted, train_forest

REPORT_FORMAT = "report/1"
DISPLAY_NAMES = {BOOSTED: "Boosted Trees", FOREST: "Random Forest"}


def derive_seed(seed: int, *keys: int) -> int:
    """Independent 32-bit seed for a (seed, key...) tuple."""
    return int(np.random.SeedSequence([seed, *keys]).generate_state(1)[0])


@dataclass(frozen=True)
class TrainerConfig:
    kind: str = BOOSTED
    forest: ForestConfig = field(default_factory=ForestConfig)
    boost: BoostConfig = field(default_factory=BoostConfig)
    smote: bool = True
    smote_k: int = 5

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "TrainerConfig":
        d = dict(d or {})
        if "forest" in d:
            d["forest"] = ForestConfig(**d["forest"])
        if "boost" in d:
            d["boost"] = BoostConfig(**d["boost"])
        return cls(**d)


@dataclass
class FittedPipeline:
    """Median imputation followed by a tree ensemble."""

    model: TreeEnsemble
    medians: np.ndarray

    def transform(self, X: np.ndarray) -> np.ndarray:
        return impute(np.atleast_2d(X), self.medians)

    def predict_proba(self, X: np.ndarray) -> np.ndarray:
        return self.model.predict_proba(self.transform(X))

    def fingerprint(self) -> str:
        h = hashlib.sha256(self.model.to_json().encode())
        h.update(np.ascontiguousarray(self.medians).tobytes())
        return h.hexdigest()


def fit_pipeline(m: FeatureMatrix, trainer: TrainerConfig, seed: int) -> FittedPipeline:
    """Fit imputation, SMOTE and the learner on every row of ``m``."""
    y = m.y
    if np.unique(y).size < 2:
        raise FoldDegenerate("training rows contain a single class")
    medians = column_medians(m.values)
    train = m.with_values(impute(m.values, medians))
    if trainer.smote:
        train = smote(train, trainer.smote_k, derive_seed(seed, 1))
    learner_seed = derive_seed(seed, 2)
    if trainer.kind == FOREST:
        cfg = ForestConfig(**{**asdict(trainer.forest), "seed": learner_seed})
        model = train_forest(train.values, train.y, cfg, m.feature_names)
    elif trainer.kind == BOOSTED:
        cfg = BoostConfig(**{**asdict(trainer.boost), "seed": learner_seed})
        model = train_boosted(train.values, train.y, cfg, m.feature_names)
    else:
        raise ValueError(f"unknown trainer kind {trainer.kind!r}")
    model.extra["preprocess"] = {"medians": [float(v) for v in medians]}
    return FittedPipeline(model, medians)


@dataclass
class FoldResult:
    index: int
    id: str
    score: float | None
    fingerprint: str | None
    error: str | None = None


def run_fold(m: FeatureMatrix, i: int, trainer: TrainerConfig, seed: int) -> FoldResult:
    """Train on every row but ``i`` and score row ``i``."""
    keep = np.ones(m.n_rows, dtype=bool)
    keep[i] = False
    try:
        pipe = fit_pipeline(m.rows(keep), trainer, derive_seed(seed, i))
    except FoldDegenerate as exc:
        return FoldResult(i, m.meta[i].id, None, None, str(exc))
    score = float(pipe.predict_proba(m.values[i])[0])
    return FoldResult(i, m.meta[i].id, score, pipe.fingerprint())


def loocv_folds(m: FeatureMatrix, trainer: TrainerConfig, seed: int = 42, n_jobs: int = 1,
                folds: Sequence[int] | None = None) -> list[FoldResult]:
    if m.n_rows < 3:
        raise ValueError("leave-one-out needs at least 3 rows")
    folds = range(m.n_rows) if folds is None else folds
    if n_jobs == 1:
        return [run_fold(m, i, trainer, seed) for i in folds]
    from joblib import Parallel, delayed

    results = Parallel(n_jobs=n_jobs)(delayed(run_fold)(m, i, trainer, seed) for i in folds)
    return sorted(results, key=lambda r: r.index)


def loocv(m: FeatureMatrix, trainer: TrainerConfig, seed: int = 42, n_jobs: int = 1) -> dict[str, float]:
    """Held-out probability per record id (degenerate folds omitted)."""
    return {r.id: r.score for r in loocv_folds(m, trainer, seed, n_jobs) if r.score is not None}


# ---------------------------------------------------------------- metrics

def _binary(labels) -> np.ndarray:
    y = np.asarray(labels).astype(np.int64)
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0/1")
    return y


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(score_pos > score_neg) with ties counted one half."""
    s = np.asarray(scores, dtype=np.float64)
    y = _binary(labels)
    n_pos = int(y.sum())
    n_neg = y.shape[0] - n_pos
    if n_pos == 0 or n_neg == 0:
        raise Undefined("AUC needs both classes")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def accuracy_confusion(scores, labels, threshold: float = 0.5) -> dict:
    s = np.asarray(scores, dtype=np.float64)
    y = _binary(labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    n = tp + fp + tn + fn
    return {"accuracy": (tp + tn) / n if n else math.nan, "tp": tp, "fp": fp, "tn": tn, "fn": fn}


def metrics(scores, labels, threshold: float = 0.5) -> dict:
    """AUC (None when undefined), accuracy and confusion counts."""
    conf = accuracy_confusion(scores, labels, threshold)
    try:
        value = auc(scores, labels)
        status = "ok"
    except Undefined:
        value, status = None, "undefined"
    return {"n": len(labels), "auc": value, "status": status, "accuracy": conf.pop("accuracy"), "confusion": conf}


STRATA = {
    "gender": (("male", lambda m: m.gender == "male"), ("female", lambda m: m.gender == "female")),
    "age50": (("age>=50", lambda m: not math.isnan(m.age) and m.age >= 50),),
    "environment": (("home", lambda m: m.environment == "home"), ("lab", lambda m: m.environment == "lab")),
}


def stratified_eval(scores, labels, meta, strata: Sequence[str] = ("gender", "age50", "environment"),
                    threshold: float = 0.5) -> dict:
    """Recompute metrics on each demographic/environment subset of the held-out scores.

    Empty or single-class strata get ``status: undefined`` and ``auc: None``.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = _binary(labels)
    out = {}
    for group in strata:
        if group not in STRATA:
            raise ValueError(f"unknown stratum group {group!r}; choose from {sorted(STRATA)}")
        for name, pred in STRATA[group]:
            sel = np.array([pred(m) for m in meta], dtype=bool)
            if not sel.any():
                out[name] = {"n": 0, "auc": None, "status": "undefined", "accuracy": None,
                             "confusion": {"tp": 0, "fp": 0, "tn": 0, "fn": 0}}
                continue
            out[name] = metrics(scores[sel], labels[sel], threshold)
    return out


# ---------------------------------------------------------------- reports

@dataclass
class EvalReport:
    per_sample_scores: dict[str, float]
    auc: float | None
    accuracy: float
    confusion: dict
    strata: dict
    config_fingerprint: str
    seed: int
    model: str = ""
    skipped_folds: list = field(default_factory=list)
    n_features: int = 0
    format: str = REPORT_FORMAT

    @property
    def n(self) -> int:
        return len(self.per_sample_scores)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, sort_keys=True) + "\n"

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        if d.get("format") != REPORT_FORMAT:
            raise ValueError(f"unsupported report format {d.get('format')!r}")
        return cls(**d)

    @classmethod
    def from_json(cls, text: str) -> "EvalReport":
        return cls.from_dict(json.loads(text))

    def table_row(self) -> tuple[str, float | None, float]:
        return (self.model, self.auc, self.accuracy)


def evaluate(m: FeatureMatrix, trainer: TrainerConfig, seed: int = 42, strata: Sequence[str] = (),
             config_fingerprint: str = "", n_jobs: int = 1, threshold: float = 0.5) -> EvalReport:
    """LOOCV over ``m`` bundled into a report (global and per-stratum metrics)."""
    folds = loocv_folds(m, trainer, seed, n_jobs)
    done = [r for r in folds if r.score is not None]
    skipped = [{"index": r.index, "id": r.id, "error": r.error} for r in folds if r.score is None]
    scores = np.array([r.score for r in done])
    labels = np.array([m.meta[r.index].y for r in done])
    meta = [m.meta[r.index] for r in done]
    overall = metrics(scores, labels, threshold)
    return EvalReport(
        per_sample_scores={r.id: r.score for r in done},
        auc=overall["auc"], accuracy=overall["accuracy"], confusion=overall["confusion"],
        strata=stratified_eval(scores, labels, meta, strata, threshold) if strata else {},
        config_fingerprint=config_fingerprint, seed=seed, model=DISPLAY_NAMES.get(trainer.kind, trainer.kind),
        skipped_folds=skipped, n_features=len(m.feature_names),
    )


def _cell(value) -> str:
    return "n/a" if value is None or (isinstance(value, float) and math.isnan(value)) else f"{value:.3f}"


def format_table(rows: Sequence[tuple[str, float | None, float | None]]) -> str:
    """Plain-text results table, one ``name | AUC | Accuracy`` line per model."""
    lines = ["Algorithm | AUC | Accuracy"]
    lines += [f"{name} | {_cell(a)} | {_cell(acc)}" for name, a, acc in rows]
    return "\n".join(lines) + "\n"


def format_strata(report: EvalReport) -> str:
    lines = ["Stratum | n | AUC | Accuracy"]
    for name, s in report.strata.items():
        lines.append(f"{name} | {s['n']} | {_cell(s['auc'])} | {_cell(s['accuracy'])}")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------- ablations

@dataclass
class AblationResult:
    mode: str
    reports: list[EvalReport]
    noop: bool = False
    removed: list[list[str]] = field(default_factory=list)

    @property
    def mean_auc(self) -> float | None:
        vals = [r.auc for r in self.reports if r.auc is not None]
        return float(np.mean(vals)) if vals else None

    @property
    def mean_accuracy(self) -> float | None:
        return float(np.mean([r.accuracy for r in self.reports])) if self.reports else None

    def to_dict(self) -> dict:
        return {"format": "ablation/1", "mode": self.mode, "noop": self.noop, "removed": self.removed,
                "mean_auc": self.mean_auc, "mean_accuracy": self.mean_accuracy,
                "reports": [r.to_dict() for r in self.reports]}


def ablation(m: FeatureMatrix, trainer: TrainerConfig, mode: str, seed: int = 42, fraction: float = 0.07,
             runs: int = 10, config_fingerprint: str = "", n_jobs: int = 1) -> AblationResult:
    """Re-run LOOCV without lab rows (``remove-lab``) or without random home rows (``remove-random``).

    ``remove-random`` drops floor(fraction * n) home rows per run, using an
    independent seed per run.
    """
    env = np.array([r.environment for r in m.meta])
    if mode == "remove-lab":
        lab = env == "lab"
        if not lab.any():
            return AblationResult(mode, [], noop=True)
        report = evaluate(m.rows(~lab), trainer, seed, (), config_fingerprint, n_jobs)
        return AblationResult(mode, [report], removed=[[m.meta[i].id for i in np.flatnonzero(lab)]])
    if mode == "remove-random":
        n_drop = int(math.floor(fraction * m.n_rows))
        home = np.flatnonzero(env == "home")
        if n_drop == 0:
            return AblationResult(mode, [], noop=True)
        if n_drop > home.size:
            raise NoOp(f"cannot drop {n_drop} home rows, only {home.size} present")
        reports, removed = [], []
        for run in range(runs):
            rng = np.random.default_rng(derive_seed(seed, 1000 + run))
            drop = np.sort(rng.choice(home, size=n_drop, replace=False))
            keep = np.ones(m.n_rows, dtype=bool)
            keep[drop] = False
            reports.append(evaluate(m.rows(keep), trainer, derive_seed(seed, 2000 + run), (),
                                    config_fingerprint, n_jobs))
            removed.append([m.meta[i].id for i in drop])
        return AblationResult(mode, reports, removed=removed)
    raise ValueError(f"unknown ablation mode {mode!r}")
