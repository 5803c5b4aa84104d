"""Command-line front end: ``qdefect {gen,split,train,tune,predict,evaluate,bench,run}``.

Every stage reads a JSON config (``--config``; all keys optional, defaults in
``qdefect.config``) and writes into ``--out``. Stage files in the output
directory::

    train.csv tune.csv test.csv split_manifest.txt   split
    models/chunk_NNN.qsvm ensemble.json              train
    pr_curve.csv (+ threshold in ensemble.json)      tune
    predictions.csv                                  predict
    metrics.csv metrics.json                         evaluate / run
    timings.csv                                      bench / run
    manifest.json config.json                        run
"""
from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .bench import bench_predict, train_records, write_timings_csv
from .config import ExperimentConfig, load_config, save_config
from .dataio import (LabeledDataset, apply_scaler, fit_scaler, gen_synthetic, load_csv,
                     save_csv, split_indices, write_split_manifest)
from .ensemble import (aggregate, evaluate_model, fit_algorithm, load_manifest, make_chunks,
                       rank_members, save_manifest, staf_train, threshold_labels,
                       train_chunks, tune_threshold)
from .metrics import (STAF_COLUMNS, CHUNKED_COLUMNS, make_report, pr_curve,
                      write_metrics_csv, write_metrics_json, write_pr_curve_csv)
from .modelio import file_sha256, model_bytes
from .svm import KernelBinding, model_scores

log = logging.getLogger("qdefect")

GLOBAL = "G. QSVC"


class StageError(RuntimeError):
    def __init__(self, stage: str, exc: Exception):
        super().__init__(f"stage '{stage}' failed: {exc}")
        self.stage = stage


# -- helpers -----------------------------------------------------------------


def _scaled(ds: LabeledDataset, params) -> LabeledDataset:
    return ds.with_features(apply_scaler(params, ds.features))


def _load_dataset(cfg: ExperimentConfig) -> LabeledDataset:
    if cfg.dataset:
        return load_csv(cfg.dataset)
    return gen_synthetic(cfg.synthetic_n, cfg.synthetic_d, cfg.synthetic_separation, cfg.seed)


def _fit_rows(idx, cfg: ExperimentConfig) -> np.ndarray:
    """Training rows the models see; tune rows are dropped when tune_disjoint."""
    if not cfg.tune_disjoint:
        return idx.train
    return idx.train[~np.isin(idx.train, idx.tune)]


def write_predictions_csv(path, algorithm: str, scores, preds, labels) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["index", "algorithm", "score", "prediction", "label"])
        for i, (s, p, y) in enumerate(zip(scores, preds, labels)):
            w.writerow([i, algorithm, repr(float(s)), int(p), int(y)])


def read_predictions_csv(path) -> dict:
    groups: dict = {}
    with Path(path).open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            g = groups.setdefault(row["algorithm"], ([], [], []))
            g[0].append(float(row["score"]))
            g[1].append(int(row["prediction"]))
            g[2].append(int(row["label"]))
    return {k: tuple(np.asarray(v) for v in g) for k, g in groups.items()}


def _train_ensemble(train: LabeledDataset, cfg: ExperimentConfig, out: Path):
    """Fit scaler on ``train``, chunk, train chunk QSVCs; returns (ensemble, scaler)."""
    scaler = fit_scaler(train.features, cfg.scale_low, cfg.scale_high)
    train_s = _scaled(train, scaler)
    plan = make_chunks(len(train_s), cfg.chunk_size, cfg.min_tail, cfg.chunk_seed)
    kernel = KernelBinding.quantum(cfg.feature_map_spec(train_s.num_features))
    ens = train_chunks(train_s, plan, kernel, C=cfg.svm_C, tol=cfg.svm_tol,
                       model_dir=out / "models", max_passes=cfg.svm_max_passes,
                       scaling=scaler, workers=cfg.workers, seed=cfg.chunk_seed,
                       metadata={"config_digest": cfg.digest(), "seed": cfg.seed})
    ens.config_digest = cfg.digest()
    return ens, scaler


def _write_split(ds, idx, cfg, out: Path) -> None:
    save_csv(ds.subset(_fit_rows(idx, cfg)), out / "train.csv")
    save_csv(ds.subset(idx.tune), out / "tune.csv")
    save_csv(ds.subset(idx.test), out / "test.csv")
    write_split_manifest(idx, out / "split_manifest.txt")


# -- stage commands ----------------------------------------------------------


def cmd_gen(n: int, d: int, separation: float, seed: int, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    save_csv(gen_synthetic(n, d, separation, seed), path)
    return path


def cmd_split(cfg: ExperimentConfig) -> Path:
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    ds = _load_dataset(cfg)
    if len(np.unique(ds.labels)) < 2:
        raise ValueError("dataset must contain both classes")
    idx = split_indices(len(ds), cfg.split_spec())
    _write_split(ds, idx, cfg, out)
    return out


def cmd_train(cfg: ExperimentConfig, train_path=None) -> Path:
    out = Path(cfg.out)
    train = load_csv(train_path or out / "train.csv")
    ens, _ = _train_ensemble(train, cfg, out)
    manifest = out / "ensemble.json"
    save_manifest(ens, manifest)
    write_timings_csv(train_records(ens), out / "timings.csv")
    return manifest


def cmd_tune(cfg: ExperimentConfig, manifest=None, tune_path=None) -> float:
    out = Path(cfg.out)
    manifest = Path(manifest or out / "ensemble.json")
    tune_path = Path(tune_path or out / "tune.csv")
    if not tune_path.exists():
        raise FileNotFoundError(f"missing tuning data: {tune_path} (run split first)")
    ens = load_manifest(manifest)
    tune = _scaled(load_csv(tune_path), ens.scaling)
    tau = tune_threshold(ens, tune.features, tune.labels, cfg.tune_metric, cfg.tie_break)
    save_manifest(ens, manifest)
    write_pr_curve_csv({(GLOBAL, "tune"): ens.tuning_curve}, out / "pr_curve.csv",
                       ens.config_digest, cfg.seed)
    return tau


def cmd_predict(cfg: ExperimentConfig, manifest=None, data_path=None, pred_path=None) -> Path:
    out = Path(cfg.out)
    ens = load_manifest(manifest or out / "ensemble.json")
    if ens.threshold is None:
        raise ValueError("ensemble has no tuned threshold (run tune first)")
    data = load_csv(data_path or out / "test.csv")
    fractions = aggregate(ens, apply_scaler(ens.scaling, data.features))
    pred_path = Path(pred_path or out / "predictions.csv")
    write_predictions_csv(pred_path, GLOBAL, fractions,
                          threshold_labels(fractions, ens.threshold), data.labels)
    return pred_path


def cmd_evaluate(cfg: ExperimentConfig, pred_path=None) -> list:
    out = Path(cfg.out)
    groups = read_predictions_csv(pred_path or out / "predictions.csv")
    reports = [make_report(alg, y, p, s) for alg, (s, p, y) in groups.items()]
    write_metrics_csv(reports, out / "metrics.csv", CHUNKED_COLUMNS, cfg.digest(), cfg.seed)
    write_metrics_json(reports, out / "metrics.json", "evaluate", cfg.digest(), cfg.seed)
    return reports


def cmd_bench(cfg: ExperimentConfig, manifest=None, data_path=None) -> list:
    out = Path(cfg.out)
    ens = load_manifest(manifest or out / "ensemble.json")
    data = load_csv(data_path or out / "test.csv")
    X = apply_scaler(ens.scaling, data.features)
    records = []
    for m in ens.members:
        t1, t2, _ = bench_predict(m.model, X, cfg.bench_repeats, m.chunk_id)
        records += [t1, t2]
    if ens.threshold is not None:
        t1, t2, _ = bench_predict(ens, X, cfg.bench_repeats, -1)
        records += [t1, t2]
    write_timings_csv(records, out / "timings.csv")
    return records


def cmd_run(cfg: ExperimentConfig) -> dict:
    """Full pipeline: split, scale, STAF or chunked training, tune, test, bench."""
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    digest, seed = cfg.digest(), cfg.seed
    stage = "load"
    try:
        ds = _load_dataset(cfg)
        stage = "split"
        if len(np.unique(ds.labels)) < 2:
            raise ValueError("dataset must contain both classes")
        idx = split_indices(len(ds), cfg.split_spec())
        _write_split(ds, idx, cfg, out)
        train = ds.subset(_fit_rows(idx, cfg))
        tune, test = ds.subset(idx.tune), ds.subset(idx.test)

        mode = cfg.mode
        if mode == "auto":
            mode = "staf" if len(train) <= cfg.staf_cap else "chunked"
        records, curves, reports = [], {}, []

        if mode == "staf":
            stage = "train"
            scaler = fit_scaler(train.features, cfg.scale_low, cfg.scale_high)
            train_s, test_s = _scaled(train, scaler), _scaled(test, scaler)
            by_alg, models = staf_train(train_s, test_s, cfg.algorithms, cfg, out / "models",
                                        scaler, {"config_digest": digest, "seed": seed})
            stage = "evaluate"
            reports = [by_alg[a] for a in cfg.algorithms]
            first = True
            for alg in cfg.algorithms:
                scores = model_scores(models[alg], test_s.features)
                if test_s.labels.sum() > 0:
                    curves[(alg, "test")] = pr_curve(scores, test_s.labels)
                if first:
                    write_predictions_csv(out / "predictions.csv", alg, scores,
                                          (scores >= 0).astype(int), test_s.labels)
                    first = False
            if cfg.bench:
                stage = "bench"
                for k, alg in enumerate(cfg.algorithms):
                    t1, t2, _ = bench_predict(models[alg], test_s.features, cfg.bench_repeats, k)
                    records += [t1, t2]
            model_files = sorted((out / "models").glob("*.qsvm"))
            columns = STAF_COLUMNS
        else:
            stage = "train"
            ens, scaler = _train_ensemble(train, cfg, out)
            tune_s, test_s = _scaled(tune, scaler), _scaled(test, scaler)
            train_s = _scaled(train, scaler)
            stage = "tune"
            tune_threshold(ens, tune_s.features, tune_s.labels, cfg.tune_metric, cfg.tie_break)
            save_manifest(ens, out / "ensemble.json")
            curves[(GLOBAL, "tune")] = ens.tuning_curve

            stage = "evaluate"
            for alg in ("SVC", "PQSVC"):
                if alg in cfg.algorithms:
                    model = fit_algorithm(alg, train_s, cfg, scaler)
                    model.metadata.update({"config_digest": digest, "seed": seed})
                    (out / "models" / f"{alg.lower()}.qsvm").write_bytes(model_bytes(model))
                    reports.append(evaluate_model(alg, model, test_s))
            members = {m.chunk_id: m for m in ens.members}
            ranked = rank_members(ens, tune_s.features, tune_s.labels)
            for rank, (cid, tune_f1) in enumerate(ranked[: cfg.top_k], start=1):
                reports.append(evaluate_model(f"QSVC ({rank})", members[cid].model, test_s,
                                              chunk_id=cid, tune_f1=tune_f1))
            fractions = aggregate(ens, test_s.features)
            labels = threshold_labels(fractions, ens.threshold)
            reports.append(make_report(GLOBAL, test_s.labels, labels, fractions,
                                       threshold=ens.threshold, n_models=ens.n,
                                       skipped_chunks=list(ens.skipped)))
            write_predictions_csv(out / "predictions.csv", GLOBAL, fractions, labels,
                                  test_s.labels)
            if cfg.bench:
                stage = "bench"
                records += train_records(ens)
                for m in ens.members:
                    t1, t2, _ = bench_predict(m.model, test_s.features, cfg.bench_repeats,
                                              m.chunk_id)
                    records += [t1, t2]
                t1, t2, _ = bench_predict(ens, test_s.features, cfg.bench_repeats, -1)
                records += [t1, t2]
            model_files = sorted((out / "models").glob("*.qsvm"))
            columns = CHUNKED_COLUMNS

        stage = "report"
        write_metrics_csv(reports, out / "metrics.csv", columns, digest, seed)
        write_metrics_json(reports, out / "metrics.json", mode, digest, seed)
        write_pr_curve_csv(curves, out / "pr_curve.csv", digest, seed)
        if records:
            write_timings_csv(records, out / "timings.csv")
        save_config(cfg, out / "config.json")
        files = ["metrics.csv", "metrics.json", "pr_curve.csv", "predictions.csv",
                 "split_manifest.txt"]
        files += [p.relative_to(out).as_posix() for p in model_files]
        if mode == "chunked":
            files.append("ensemble.json")
        manifest = {
            "config_digest": digest,
            "seed": seed,
            "mode": mode,
            "sizes": {"train": len(train), "tune": len(tune), "test": len(test)},
            "files": {f: file_sha256(out / f) for f in sorted(files)},
        }
        (out / "manifest.json").write_text(json.dumps(manifest, indent=2, sort_keys=True)
                                           + "\n", encoding="utf-8")
    except Exception as exc:
        raise StageError(stage, exc) from exc
    return {"mode": mode, "reports": reports, "out": out}


# -- argument parsing --------------------------------------------------------


def _config(args) -> ExperimentConfig:
    cfg = load_config(args.config) if getattr(args, "config", None) else ExperimentConfig()
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "out", None) is not None:
        cfg.out = args.out
    if getattr(args, "dataset", None):
        cfg.dataset = args.dataset
    return cfg


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="qdefect", description=__doc__.splitlines()[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp, dataset=False):
        sp.add_argument("--config", help="JSON config file")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--out", help="output directory")
        if dataset:
            sp.add_argument("--dataset", help="labelled CSV (overrides config)")
        return sp

    g = sub.add_parser("gen", help="write a synthetic two-blob dataset CSV")
    g.add_argument("--n", type=int, default=600)
    g.add_argument("--d", type=int, default=4)
    g.add_argument("--separation", type=float, default=4.0)
    g.add_argument("--seed", type=int, default=0)
    g.add_argument("--path", required=True)

    common(sub.add_parser("split", help="train/tune/test split"), dataset=True)
    sp = common(sub.add_parser("train", help="train chunk models"))
    sp.add_argument("--train", help="training CSV (default OUT/train.csv)")
    sp = common(sub.add_parser("tune", help="tune the aggregation threshold"))
    sp.add_argument("--manifest")
    sp.add_argument("--tune", help="tuning CSV (default OUT/tune.csv)")
    sp = common(sub.add_parser("predict", help="vote fractions and labels"))
    sp.add_argument("--manifest")
    sp.add_argument("--data", help="CSV to predict (default OUT/test.csv)")
    sp.add_argument("--predictions", help="output CSV (default OUT/predictions.csv)")
    sp = common(sub.add_parser("evaluate", help="metrics from a predictions CSV"))
    sp.add_argument("--predictions")
    sp = common(sub.add_parser("bench", help="Test-1 vs Test-2 timing"))
    sp.add_argument("--manifest")
    sp.add_argument("--data")
    common(sub.add_parser("run", help="full pipeline"), dataset=True)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "gen":
            print(cmd_gen(args.n, args.d, args.separation, args.seed, args.path))
            return 0
        cfg = _config(args)
        if args.command == "split":
            print(cmd_split(cfg))
        elif args.command == "train":
            print(cmd_train(cfg, args.train))
        elif args.command == "tune":
            print(f"threshold {cmd_tune(cfg, args.manifest, args.tune)!r}")
        elif args.command == "predict":
            print(cmd_predict(cfg, args.manifest, args.data, args.predictions))
        elif args.command == "evaluate":
            for rep in cmd_evaluate(cfg, args.predictions):
                print(" ".join(f"{v:.4f}" if isinstance(v, float) else str(v)
                               for v in rep.row()))
        elif args.command == "bench":
            for r in cmd_bench(cfg, args.manifest, args.data):
                print(f"{r.phase} chunk={r.chunk_id} n={r.instances} {r.wall_seconds:.4f}s")
        elif args.command == "run":
            res = cmd_run(cfg)
            print(f"mode={res['mode']} out={res['out']}")
            for rep in res["reports"]:
                print(" ".join(f"{v:.4f}" if isinstance(v, float) else str(v)
                               for v in rep.row()))
    except StageError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:
        print(f"error: stage '{args.command}' failed: {exc}", file=sys.stderr)
        return 2
    return 0


if __name__ == "__main__":
    sys.exit(main())
