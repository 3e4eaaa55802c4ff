import itertools
import json

import numpy as np
import pytest

from voxscreen.dataset import RecordMeta, from_rows
from voxscreen.errors import NoOp, Undefined
from voxscreen.evaluate import (EvalReport, TrainerConfig, ablation, accuracy_confusion, auc, derive_seed, evaluate,
                                format_table, loocv, loocv_folds, stratified_eval)
from voxscreen.learn import BOOSTED, FOREST, BoostConfig, ForestConfig

FAST = TrainerConfig(BOOSTED, boost=BoostConfig(n_rounds=20, max_depth=2), smote_k=3)


def cohort(n=24, seed=0, sep=2.0, envs=None, genders=None):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.standard_normal((n, 3))
    X[:, 0] += sep * y
    meta = [RecordMeta(f"s{i:02d}", "PD" if y[i] else "non-PD",
                       genders[i] if genders else ("male" if i % 4 < 2 else "female"),
                       30.0 + 2 * i, envs[i] if envs else "home", "US") for i in range(n)]
    return from_rows(["a", "b", "c"], X, meta)


def pair_auc(scores, labels):
    pos = [s for s, l in zip(scores, labels) if l == 1]
    neg = [s for s, l in zip(scores, labels) if l == 0]
    total = sum(1.0 if p > q else 0.5 if p == q else 0.0 for p in pos for q in neg)
    return total / (len(pos) * len(neg))


# ---------------------------------------------------------------- AUC

def test_auc_examples():
    assert auc([.9, .8, .3, .2], [1, 1, 0, 0]) == 1.0
    assert auc([.9, .2, .8, .3], [1, 0, 0, 1]) == 0.75
    assert auc([.5] * 6, [1, 0, 1, 0, 1, 0]) == 0.5


def test_auc_single_class():
    with pytest.raises(Undefined):
        auc([0.1, 0.2], [1, 1])


def test_auc_matches_trapezoid_roc(rng):
    s = rng.integers(0, 5, 40) / 4
    y = rng.integers(0, 2, 40)
    thresholds = np.r_[np.inf, np.unique(s)[::-1]]
    tpr = [((s >= t) & (y == 1)).sum() / (y == 1).sum() for t in thresholds]
    fpr = [((s >= t) & (y == 0)).sum() / (y == 0).sum() for t in thresholds]
    assert auc(s, y) == pytest.approx(np.trapezoid(tpr, fpr), abs=1e-12)


def test_auc_flip_and_monotone(rng):
    s = rng.standard_normal(50)
    y = rng.integers(0, 2, 50)
    assert auc(s, y) == pytest.approx(1 - auc(s, 1 - y), abs=1e-12)
    assert auc(np.exp(s), y) == auc(s, y) == auc(3 * s - 7, y)


# ---------------------------------------------------------------- accuracy

def test_accuracy_examples():
    c = accuracy_confusion([.9, .8, .1], [1, 1, 0])
    assert c["accuracy"] == 1 and c["fp"] == 0 and c["fn"] == 0
    c = accuracy_confusion([0.0] * 5, [1, 0, 0, 1, 0])
    assert c["accuracy"] == 0.6
    assert accuracy_confusion([0.5], [1])["tp"] == 1


def test_accuracy_counting_oracle(rng):
    for _ in range(200):
        s = rng.random(30)
        y = rng.integers(0, 2, 30)
        c = accuracy_confusion(s, y)
        tp = sum(1 for a, b in zip(s, y) if a >= 0.5 and b == 1)
        tn = sum(1 for a, b in zip(s, y) if a < 0.5 and b == 0)
        assert (c["tp"], c["tn"]) == (tp, tn)
        assert c["tp"] + c["fp"] + c["tn"] + c["fn"] == 30
        assert c["accuracy"] == (tp + tn) / 30


# ---------------------------------------------------------------- LOOCV

def test_three_rows_three_folds():
    m = cohort(3)
    m = from_rows(m.feature_names, m.values, [m.meta[0], m.meta[1], RecordMeta("x", "PD")])
    folds = loocv_folds(m, TrainerConfig(BOOSTED, boost=BoostConfig(n_rounds=2), smote=False), 1)
    assert len(folds) == 3 and [f.index for f in folds] == [0, 1, 2]


def test_degenerate_fold_skipped():
    m = cohort(4)
    labels = ["PD", "non-PD", "non-PD", "non-PD"]
    m = from_rows(m.feature_names, m.values, [RecordMeta(f"q{i}", l) for i, l in enumerate(labels)])
    report = evaluate(m, TrainerConfig(BOOSTED, boost=BoostConfig(n_rounds=2), smote=False), 1)
    assert [s["id"] for s in report.skipped_folds] == ["q0"]
    assert report.n == 3


def test_loocv_deterministic_and_separable():
    m = cohort(60, sep=8.0)
    a = loocv(m, FAST, 5)
    assert a == loocv(m, FAST, 5)
    ids = list(a)
    y = [m.meta[m.ids.index(i)].y for i in ids]
    assert auc([a[i] for i in ids], y) >= 0.95


def test_parallel_folds_match_sequential():
    m = cohort(12)
    seq = loocv_folds(m, FAST, 3, n_jobs=1)
    par = loocv_folds(m, FAST, 3, n_jobs=2)
    assert [(f.score, f.fingerprint) for f in seq] == [(f.score, f.fingerprint) for f in par]


def test_fold_seed_independent_of_order():
    m = cohort(10)
    full = loocv_folds(m, FAST, 9)
    part = loocv_folds(m, FAST, 9, folds=[7, 2])
    assert part[0].fingerprint == full[7].fingerprint and part[1].score == full[2].score
    assert derive_seed(9, 7) != derive_seed(9, 2)


def test_forest_trainer_runs():
    m = cohort(16, sep=4.0)
    report = evaluate(m, TrainerConfig(FOREST, forest=ForestConfig(n_trees=15)), 2)
    assert report.model == "Random Forest" and report.auc >= 0.8


# ---------------------------------------------------------------- strata

def test_all_male_cohort():
    scores = np.array([.9, .2, .8, .3])
    labels = np.array([1, 0, 0, 1])
    meta = [RecordMeta(f"m{i}", "PD" if l else "non-PD", "male", 60.0) for i, l in enumerate(labels)]
    out = stratified_eval(scores, labels, meta)
    assert out["female"]["status"] == "undefined" and out["female"]["auc"] is None
    assert out["male"]["auc"] == 0.75 and out["age>=50"]["n"] == 4
    assert set(out) == {"male", "female", "age>=50", "home", "lab"}


def test_per_gender_swap():
    scores = np.array([.9, .1, .8, .2, .1, .9, .2, .8])
    labels = np.array([1, 0, 1, 0, 1, 0, 1, 0])
    genders = ["male"] * 4 + ["female"] * 4
    meta = [RecordMeta(f"g{i}", "PD" if l else "non-PD", g) for i, (l, g) in enumerate(zip(labels, genders))]
    out = stratified_eval(scores, labels, meta, ("gender",))
    assert out["male"]["auc"] == 1.0 and out["female"]["auc"] == 0.0
    assert out["male"]["n"] + out["female"]["n"] == 8


def test_unknown_stratum():
    with pytest.raises(ValueError):
        stratified_eval([0.5, 0.4], [1, 0], [RecordMeta("a", "PD"), RecordMeta("b", "non-PD")], ("height",))


# ---------------------------------------------------------------- reports

def test_report_round_trip_and_invariants():
    m = cohort(14)
    r = evaluate(m, FAST, 4, ("gender", "age50", "environment"), "abc")
    assert len(r.strata) == 5
    assert sum(r.confusion.values()) == r.n and 0 <= r.auc <= 1
    back = EvalReport.from_json(r.to_json())
    assert back == r and back.to_json() == r.to_json()
    assert json.loads(r.to_json())["format"] == "report/1"
    assert r.seed == 4 and r.config_fingerprint == "abc"


def test_table_layout():
    assert format_table([("XGBoost", 0.7533, 0.741)]).splitlines() == ["Algorithm | AUC | Accuracy",
                                                                        "XGBoost | 0.753 | 0.741"]


# ---------------------------------------------------------------- ablation

def test_remove_lab_noop():
    res = ablation(cohort(10), FAST, "remove-lab")
    assert res.noop and res.reports == []


def test_remove_lab_drops_lab_rows():
    envs = ["lab" if i in (0, 5) else "home" for i in range(12)]
    res = ablation(cohort(12, envs=envs), FAST, "remove-lab", 1)
    assert res.reports[0].n == 10 and res.removed == [["s00", "s05"]]


def test_remove_random_sizes_and_mean():
    m = cohort(100, sep=3.0)
    res = ablation(m, TrainerConfig(BOOSTED, boost=BoostConfig(n_rounds=3, max_depth=1), smote=False),
                   "remove-random", 3, fraction=0.07, runs=3)
    assert [r.n for r in res.reports] == [93, 93, 93]
    assert res.mean_auc == pytest.approx(np.mean([r.auc for r in res.reports]), abs=1e-15)
    assert len({tuple(x) for x in res.removed}) == 3


def test_remove_random_infeasible():
    envs = ["lab"] * 11 + ["home"]
    with pytest.raises(NoOp):
        ablation(cohort(12, envs=envs), FAST, "remove-random", fraction=0.25, runs=1)
