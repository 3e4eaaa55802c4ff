import csv
import json
import shutil

import numpy as np
import pytest

from voxscreen.cli import main
from voxscreen.dataset import RecordMeta, from_rows, load_csv, save_csv
from voxscreen.features.names import CANONICAL_FEATURES
from voxscreen.learn.ensemble import load_model

FAST = ["--smote-k", "3", "--seed", "7"]


def cohort_spec(n=8):
    return {"sample_rate": 16000, "duration_s": 0.6, "pad_s": 0.1,
            "classes": {"PD": {"n": n, "f0_hz": [100, 140], "jitter": [0.02, 0.035], "shimmer": [0.06, 0.1],
                               "snr_db": [15, 20]},
                        "non-PD": {"n": n, "f0_hz": [140, 200], "jitter": [0.002, 0.006],
                                   "shimmer": [0.01, 0.03], "snr_db": [20, 30]}},
            "meta": {"lab_fraction": 0.3}}


@pytest.fixture(scope="module")
def cohort(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    spec = root / "spec.json"
    spec.write_text(json.dumps(cohort_spec()))
    assert main(["synth", "--spec", str(spec), "--out", str(root / "cohort"), "--seed", "3"]) == 0
    assert main(["extract", str(root / "cohort" / "manifest.csv"), "--out", str(root / "feats.csv")]) == 0
    return root


def header(path):
    with open(path, newline="") as fh:
        return next(csv.reader(fh))


def test_extract_outputs(cohort):
    m = load_csv(cohort / "feats.csv")
    assert len(m) == 16 and m.feature_names == tuple(CANONICAL_FEATURES)
    report = json.loads((cohort / "feats.csv.extract.json").read_text())
    assert report["format"] == "extract/1" and report["seed"] == 42
    assert len(report["config_fingerprint"]) == 64
    assert len(report["recordings"]) == 16 and report["skipped"] == []
    assert {"start_index", "end_index", "speech_found"} <= set(report["recordings"][0]["trim"])


def _subset_manifest(cohort, out, n=3):
    src = cohort / "cohort" / "manifest.csv"
    rows = list(csv.DictReader(open(src)))[:n]
    shutil.copytree(cohort / "cohort" / "wav", out / "wav", dirs_exist_ok=True)
    with open(out / "manifest.csv", "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    return rows


def test_extract_three_wavs(cohort, tmp_path):
    _subset_manifest(cohort, tmp_path)
    assert main(["extract", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "f.csv"), "--jobs", "2"]) == 0
    assert len(header(tmp_path / "f.csv")) == 6 + 44
    assert len(load_csv(tmp_path / "f.csv")) == 3


def test_extract_all_features(cohort, tmp_path):
    _subset_manifest(cohort, tmp_path, 2)
    assert main(["extract", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "f.csv"), "--all-features"]) == 0
    assert len(header(tmp_path / "f.csv")) == 6 + 52


def test_corrupt_wav_is_skipped(cohort, tmp_path, caplog):
    rows = _subset_manifest(cohort, tmp_path)
    (tmp_path / rows[1]["path"]).write_bytes(b"RIFF\x00\x00garbage")
    assert main(["extract", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "f.csv")]) == 0
    assert len(load_csv(tmp_path / "f.csv")) == 2
    report = json.loads((tmp_path / "f.csv.extract.json").read_text())
    assert [s["id"] for s in report["skipped"]] == [rows[1]["id"]]
    assert any(rows[1]["id"] in r.message for r in caplog.records)


def test_all_fail_is_fatal(cohort, tmp_path, capsys):
    rows = _subset_manifest(cohort, tmp_path, 2)
    for r in rows:
        (tmp_path / r["path"]).write_bytes(b"nope")
    assert main(["extract", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "f.csv")]) == 1
    assert "error:" in capsys.readouterr().err


def test_empty_manifest_is_fatal(tmp_path, capsys):
    (tmp_path / "manifest.csv").write_text("id,path,label\n")
    assert main(["extract", str(tmp_path / "manifest.csv"), "--out", str(tmp_path / "f.csv")]) == 1
    assert main(["extract", str(tmp_path / "missing.csv"), "--out", str(tmp_path / "f.csv")]) == 1
    assert not (tmp_path / "f.csv").exists()


def test_synth_empty_class_is_fatal(tmp_path, capsys):
    spec = cohort_spec()
    spec["classes"]["PD"]["n"] = 0
    (tmp_path / "s.json").write_text(json.dumps(spec))
    assert main(["synth", "--spec", str(tmp_path / "s.json"), "--out", str(tmp_path / "c")]) == 1
    assert "error:" in capsys.readouterr().err


def test_train_and_eval_are_deterministic(cohort, tmp_path, capsys):
    feats = str(cohort / "feats.csv")
    for tag in ("a", "b"):
        assert main(["train", feats, "--out", str(tmp_path / f"model_{tag}.json"), *FAST]) == 0
        assert main(["eval", feats, "--out", str(tmp_path / f"report_{tag}.json"), *FAST,
                     "--strata", "gender,age50,environment"]) == 0
    assert (tmp_path / "model_a.json").read_bytes() == (tmp_path / "model_b.json").read_bytes()
    assert (tmp_path / "report_a.json").read_bytes() == (tmp_path / "report_b.json").read_bytes()
    report = json.loads((tmp_path / "report_a.json").read_text())
    assert report["seed"] == 7 and len(report["config_fingerprint"]) == 64
    assert set(report["strata"]) == {"male", "female", "age>=50", "home", "lab"}
    assert len(report["per_sample_scores"]) == 16
    model = load_model(tmp_path / "model_a.json")
    assert model.extra["seed"] == 7 and model.extra["config_fingerprint"] == report["config_fingerprint"]
    out = capsys.readouterr().out
    assert "AUC" in out and "age>=50" in out


def test_config_file_and_flag_override(cohort, tmp_path):
    cfg = tmp_path / "cfg.json"
    cfg.write_text(json.dumps({"seed": 11, "trainer": {"smote_k": 3}}))
    feats = str(cohort / "feats.csv")
    assert main(["eval", feats, "--config", str(cfg), "--out", str(tmp_path / "a.json")]) == 0
    assert main(["eval", feats, "--config", str(cfg), "--seed", "12", "--out", str(tmp_path / "b.json")]) == 0
    a = json.loads((tmp_path / "a.json").read_text())
    b = json.loads((tmp_path / "b.json").read_text())
    assert a["seed"] == 11 and b["seed"] == 12
    assert a["config_fingerprint"] != b["config_fingerprint"]
    cfg.write_text(json.dumps({"bogus": 1}))
    assert main(["eval", feats, "--config", str(cfg), "--out", str(tmp_path / "c.json")]) == 1


def informative_csv(path, n=40, seed=0):
    rng = np.random.default_rng(seed)
    y = np.arange(n) % 2
    X = rng.standard_normal((n, 5))
    X[:, 2] += 3.0 * y
    meta = [RecordMeta(f"r{i:02d}", "PD" if y[i] else "non-PD") for i in range(n)]
    save_csv(from_rows(["n0", "n1", "signal", "n3", "n4"], X, meta), path)


def test_explain_ranks_informative_feature(tmp_path, capsys):
    informative_csv(tmp_path / "x.csv")
    out = tmp_path / "exp"
    assert main(["explain", str(tmp_path / "x.csv"), "--out-dir", str(out), *FAST, "--curve-ks", "1,2,full"]) == 0
    imp = json.loads((out / "importance.json").read_text())
    assert imp["ranking"][0]["feature"] == "signal" and imp["seed"] == 7
    assert header(out / "attributions.csv") == ["id", "base_value", "n0", "n1", "signal", "n3", "n4"]
    curve = json.loads((out / "curve.json").read_text())
    assert [p["k"] for p in curve["curve"]] == [1, 2, 5]
    assert (out / "curve.tsv").read_text().splitlines()[0] == "k\tauc\taccuracy\tauc_ma3"
    assert capsys.readouterr().out.startswith("signal\t")


def test_explain_with_saved_model(tmp_path):
    informative_csv(tmp_path / "x.csv")
    assert main(["train", str(tmp_path / "x.csv"), "--out", str(tmp_path / "m.json"), *FAST]) == 0
    assert main(["explain", str(tmp_path / "x.csv"), "--model", str(tmp_path / "m.json"),
                 "--out-dir", str(tmp_path / "e"), "--curve-k", "0", *FAST]) == 0
    assert not (tmp_path / "e" / "curve.json").exists()
    assert json.loads((tmp_path / "e" / "importance.json").read_text())["ranking"][0]["feature"] == "signal"


def test_ablate_no_lab_is_noop(tmp_path, capsys):
    informative_csv(tmp_path / "x.csv")
    assert main(["ablate", str(tmp_path / "x.csv"), "--mode", "remove-lab", "--out", str(tmp_path / "a.json"),
                 *FAST]) == 0
    assert json.loads((tmp_path / "a.json").read_text())["noop"] is True
    assert "no-op" in capsys.readouterr().out


def test_bad_csv_reports_error(tmp_path, capsys):
    (tmp_path / "bad.csv").write_text("a,b\n1,2\n")
    assert main(["eval", str(tmp_path / "bad.csv"), "--out", str(tmp_path / "r.json")]) == 1
    assert "header must start with" in capsys.readouterr().err
