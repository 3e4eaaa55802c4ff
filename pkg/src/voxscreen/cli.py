"""Command-line driver: synth, extract, train, eval, explain, ablate."""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from dataclasses import replace
from pathlib import Path

import numpy as np

from . import __version__
from .config import PipelineConfig
from .dataset import RecordMeta, from_rows, load_csv, prune_correlated, save_csv
from .errors import InvalidArgument, ParseError, SchemaError, VoxscreenError
from .evaluate import ablation, evaluate, fit_pipeline, format_strata, format_table
from .explain import (global_importance, shap_validation_curve, tree_shap, write_attributions_csv,
                      write_curve)
from .features.extract import extract_file
from .features.names import ALL_FEATURES, CANONICAL_FEATURES
from .learn.ensemble import BOOSTED, FOREST, load_model, save_model
from .synth import DEFAULT_COHORT, generate_cohort

logger = logging.getLogger("voxscreen")


# ---------------------------------------------------------------- configuration

def _add_config_flags(p: argparse.ArgumentParser, extraction: bool = False, learning: bool = False) -> None:
    p.add_argument("--config", help="JSON pipeline config; explicit flags override it")
    p.add_argument("--seed", type=int, help="master seed (default 42)")
    if extraction:
        p.add_argument("--sample-rate", type=int, help="analysis sample rate in Hz (default 16000)")
        p.add_argument("--f0-floor", type=float, help="lowest F0 candidate in Hz (default 60)")
        p.add_argument("--f0-ceil", type=float, help="highest F0 candidate in Hz (default 400)")
        p.add_argument("--voicing-threshold", type=float, help="NCCF voicing threshold (default 0.45)")
        p.add_argument("--all-features", action="store_true", default=None,
                       help="also emit the correlated jitter/shimmer variants")
    if learning:
        p.add_argument("--threshold", type=float, help="correlation pruning threshold (default 0.9)")
        p.add_argument("--smote-k", type=int, help="SMOTE neighbours (default 5)")
        p.add_argument("--no-smote", action="store_true", help="disable minority oversampling")
        p.add_argument("--trainer", choices=[BOOSTED, FOREST], help="learner kind (default boosted)")
        p.add_argument("--strata", help="comma list from gender,age50,environment")


def resolve_config(args: argparse.Namespace) -> PipelineConfig:
    cfg = PipelineConfig.load(args.config) if getattr(args, "config", None) else PipelineConfig()
    if getattr(args, "seed", None) is not None:
        cfg = replace(cfg, seed=args.seed)
    ex = cfg.extraction
    pitch = ex.pitch
    for flag, attr in (("f0_floor", "f0_floor"), ("f0_ceil", "f0_ceil"), ("voicing_threshold", "voicing_threshold")):
        value = getattr(args, flag, None)
        if value is not None:
            pitch = replace(pitch, **{attr: value})
    ex = replace(ex, pitch=pitch)
    if getattr(args, "sample_rate", None) is not None:
        ex = replace(ex, sample_rate=args.sample_rate)
    cfg = replace(cfg, extraction=ex)
    if getattr(args, "all_features", None):
        cfg = replace(cfg, all_features=True)
    if getattr(args, "threshold", None) is not None:
        cfg = replace(cfg, prune_threshold=args.threshold)
    trainer = cfg.trainer
    if getattr(args, "smote_k", None) is not None:
        trainer = replace(trainer, smote_k=args.smote_k)
    if getattr(args, "no_smote", False):
        trainer = replace(trainer, smote=False)
    if getattr(args, "trainer", None):
        trainer = replace(trainer, kind=args.trainer)
    cfg = replace(cfg, trainer=trainer)
    if getattr(args, "strata", None):
        cfg = replace(cfg, strata=tuple(s.strip() for s in args.strata.split(",") if s.strip()))
    if cfg.extraction.pitch.f0_floor >= cfg.extraction.pitch.f0_ceil:
        raise InvalidArgument("--f0-floor must be below --f0-ceil")
    if cfg.trainer.smote_k < 1:
        raise InvalidArgument("--smote-k must be at least 1")
    return cfg


def _stamp(cfg: PipelineConfig) -> dict:
    return {"config_fingerprint": cfg.fingerprint(), "seed": cfg.seed}


def _write_json(path: str | Path, doc: dict) -> None:
    Path(path).parent.mkdir(parents=True, exist_ok=True)
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _prepare(args, cfg: PipelineConfig):
    m = load_csv(args.features)
    pruned, dropped = prune_correlated(m, cfg.prune_threshold)
    if dropped:
        logger.info("pruned %d correlated features: %s", len(dropped), ", ".join(dropped))
    return pruned, dropped


# ---------------------------------------------------------------- manifest

def read_manifest(source: str | Path, meta_path: str | Path | None = None) -> list[dict]:
    """Rows of ``id``, absolute ``path`` and RecordMeta columns.

    ``source`` is a manifest CSV (paths relative to it) or a directory of
    ``<id>.wav`` files described by ``meta_path``.
    """
    source = Path(source)
    meta = {}
    if meta_path is not None:
        meta = {r["id"]: r for r in _read_rows(Path(meta_path))}
    if source.is_dir():
        if not meta:
            raise InvalidArgument("an audio directory needs --meta listing id and label")
        rows = [{**r, "path": str(source / f"{rid}.wav")} for rid, r in meta.items()]
    else:
        rows = []
        for r in _read_rows(source):
            if "path" not in r or "id" not in r:
                raise SchemaError(f"{source}: manifest needs id and path columns")
            p = Path(r["path"])
            rows.append({**r, **meta.get(r["id"], {}), "path": str(p if p.is_absolute() else source.parent / p)})
    if not rows:
        raise InvalidArgument(f"{source}: manifest lists no recordings")
    return rows


def _read_rows(path: Path) -> list[dict]:
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            return list(csv.DictReader(fh))
    except (OSError, UnicodeDecodeError, csv.Error) as exc:
        raise ParseError(f"{path}: unreadable manifest ({exc})") from None


def _record_meta(row: dict) -> RecordMeta:
    age = row.get("age", "") or ""
    return RecordMeta(row["id"], row.get("label", ""), row.get("gender") or "unspecified",
                      float(age) if age.strip() else float("nan"), row.get("environment") or "home",
                      row.get("country", "") or "")


def _extract_one(row: dict, cfg):
    try:
        meta = _record_meta(row)
        return meta, extract_file(row["path"], cfg), None
    except (VoxscreenError, OSError, ValueError) as exc:
        return None, None, f"{type(exc).__name__}: {exc}"


# ---------------------------------------------------------------- commands

def cmd_synth(args) -> int:
    spec = DEFAULT_COHORT
    if args.spec:
        try:
            spec = json.loads(Path(args.spec).read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise InvalidArgument(f"{args.spec}: unreadable cohort spec ({exc})") from None
    seed = 42 if args.seed is None else args.seed
    rows = generate_cohort(spec, args.out, seed)
    print(f"wrote {len(rows)} recordings to {args.out}")
    return 0


def cmd_extract(args) -> int:
    cfg = resolve_config(args)
    rows = read_manifest(args.source, args.meta)
    names = ALL_FEATURES if cfg.all_features else CANONICAL_FEATURES
    ex = cfg.extraction
    if args.jobs == 1:
        results = [_extract_one(r, ex) for r in rows]
    else:
        from joblib import Parallel, delayed

        results = Parallel(n_jobs=args.jobs)(delayed(_extract_one)(r, ex) for r in rows)
    metas, values, recordings, skipped = [], [], [], []
    for row, (meta, feats, err) in zip(rows, results):
        if err is not None:
            logger.warning("skipping %s: %s", row.get("id", row["path"]), err)
            skipped.append({"id": row.get("id", ""), "error": err})
            continue
        metas.append(meta)
        values.append(feats.row(names))
        recordings.append({"id": meta.id, "trim": feats.bounds.to_dict()})
    print(f"extracted {len(metas)} of {len(rows)} recordings, skipped {len(skipped)}", file=sys.stderr)
    if not metas:
        raise InvalidArgument("every recording failed extraction")
    save_csv(from_rows(names, values, metas), args.out)
    report = Path(args.report) if args.report else Path(str(args.out) + ".extract.json")
    _write_json(report, {"format": "extract/1", **_stamp(cfg), "feature_names": list(names),
                         "recordings": recordings, "skipped": skipped})
    return 0


def cmd_train(args) -> int:
    cfg = resolve_config(args)
    m, dropped = _prepare(args, cfg)
    pipe = fit_pipeline(m, cfg.trainer, cfg.seed)
    pipe.model.extra.update({**_stamp(cfg), "pruned_features": dropped})
    save_model(pipe.model, args.out)
    print(f"model {pipe.model.fingerprint()[:12]} with {len(m.feature_names)} features -> {args.out}")
    return 0


def cmd_eval(args) -> int:
    cfg = resolve_config(args)
    m, dropped = _prepare(args, cfg)
    report = evaluate(m, cfg.trainer, cfg.seed, cfg.strata if args.strata else (), cfg.fingerprint(),
                      args.jobs, cfg.decision_threshold)
    Path(args.out).parent.mkdir(parents=True, exist_ok=True)
    Path(args.out).write_text(report.to_json(), encoding="utf-8")
    print(format_table([report.table_row()]), end="")
    if report.strata:
        print(format_strata(report), end="")
    return 0


def cmd_explain(args) -> int:
    cfg = resolve_config(args)
    m, dropped = _prepare(args, cfg)
    if args.model:
        model = load_model(args.model)
        if tuple(model.feature_names) != tuple(m.feature_names):
            raise SchemaError("model features do not match the pruned matrix")
        medians = np.asarray(model.extra.get("preprocess", {}).get("medians"), dtype=np.float64)
        X = np.where(np.isnan(m.values), medians, m.values)
    else:
        pipe = fit_pipeline(m, cfg.trainer, cfg.seed)
        model, X = pipe.model, pipe.transform(m.values)
    attributions = [tree_shap(model, x, rid) for x, rid in zip(X, m.ids)]
    ranking = global_importance(attributions, list(m.feature_names))
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_attributions_csv(attributions, m.feature_names, out / "attributions.csv")
    _write_json(out / "importance.json", {**ranking.to_dict(), **_stamp(cfg), "model": model.fingerprint()})
    ks = _parse_ks(args.curve_ks, len(m.feature_names)) if args.curve_ks else None
    if args.curve_k > 0 or ks:
        curve = shap_validation_curve(m, ranking, cfg.trainer, cfg.seed, max_k=args.curve_k, ks=ks,
                                      n_jobs=args.jobs)
        write_curve(curve, out / "curve.json", out / "curve.tsv", _stamp(cfg))
    for name, value in zip(ranking.names[:args.top], ranking.mean_abs_phi):
        print(f"{name}\t{value:.6f}")
    return 0


def _parse_ks(text: str, full: int) -> list[int]:
    ks = []
    for item in text.split(","):
        item = item.strip()
        if item == "full":
            ks.append(full)
        elif item.isdigit() and int(item) > 0:
            ks.append(int(item))
        else:
            raise InvalidArgument(f"--curve-ks expects positive integers or 'full', got {item!r}")
    return ks


def cmd_ablate(args) -> int:
    cfg = resolve_config(args)
    m, dropped = _prepare(args, cfg)
    result = ablation(m, cfg.trainer, args.mode, cfg.seed, args.fraction, args.runs, cfg.fingerprint(), args.jobs)
    _write_json(args.out, {**result.to_dict(), **_stamp(cfg)})
    if result.noop:
        print(f"{args.mode}: nothing to remove (no-op)")
    else:
        print(format_table([(f"{args.mode} mean of {len(result.reports)}", result.mean_auc, result.mean_accuracy)]),
              end="")
    return 0


# ---------------------------------------------------------------- entry point

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="voxscreen", description=__doc__)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="count", default=0)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic pulse-train cohort")
    p.add_argument("--spec", help="cohort spec JSON (default: built-in 30/30 cohort)")
    p.add_argument("--out", required=True)
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("extract", help="audio -> feature CSV")
    p.add_argument("source", help="manifest CSV (id,path,label,...) or directory of <id>.wav")
    p.add_argument("--meta", help="CSV of RecordMeta columns keyed by id")
    p.add_argument("--out", required=True)
    p.add_argument("--report", help="per-recording JSON (default: <out>.extract.json)")
    p.add_argument("--jobs", type=int, default=1)
    _add_config_flags(p, extraction=True)
    p.set_defaults(func=cmd_extract)

    for name, func, help_ in (("train", cmd_train, "fit the full-data model"),
                              ("eval", cmd_eval, "leave-one-out evaluation report"),
                              ("explain", cmd_explain, "TreeSHAP attributions and validation curve"),
                              ("ablate", cmd_ablate, "lab-removal or random-removal ablation")):
        p = sub.add_parser(name, help=help_)
        p.add_argument("features", help="feature CSV from extract")
        p.add_argument("--jobs", type=int, default=1)
        _add_config_flags(p, learning=True)
        p.set_defaults(func=func)
        if name in ("train", "eval", "ablate"):
            p.add_argument("--out", required=True)
        if name == "explain":
            p.add_argument("--out-dir", required=True)
            p.add_argument("--model", help="explain a saved model instead of refitting")
            p.add_argument("--curve-k", type=int, default=20, help="validation curve length K (0 disables)")
            p.add_argument("--curve-ks", help="explicit k values, e.g. '1,2,5,full' (overrides --curve-k)")
            p.add_argument("--top", type=int, default=20)
        if name == "ablate":
            p.add_argument("--mode", choices=["remove-lab", "remove-random"], required=True)
            p.add_argument("--fraction", type=float, default=0.07)
            p.add_argument("--runs", type=int, default=10)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.WARNING - 10 * min(args.verbose, 2),
                        format="%(asctime)s %(levelname)s %(name)s: %(message)s")
    try:
        return args.func(args)
    except VoxscreenError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
