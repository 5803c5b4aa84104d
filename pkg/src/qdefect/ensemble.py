"""Chunked "Global QSVC": one SVC per training chunk, averaged votes, tuned cut.

Each chunk model casts a 0/1 vote per instance; the vote fraction is the
count of buggy votes divided by the number of models, and an instance is
labelled buggy when its fraction reaches the tuned threshold. Small
training sets skip chunking entirely (STAF mode, see ``staf_train``).
"""
from __future__ import annotations

import csv
import io
import json
import logging
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from .config import ExperimentConfig
from .dataio import LabeledDataset, ScalingParams
from .metrics import EvalReport, basic_metrics, confusion, make_report
from .modelio import file_sha256, load_model, model_bytes
from .svm import (KernelBinding, TrainedSvm, default_rbf_gamma, fit_svc, model_predict,
                  model_scores, predict, train_pegasos)

log = logging.getLogger(__name__)

MANIFEST_VERSION = 1


class EnsembleError(RuntimeError):
    pass


# -- chunking ----------------------------------------------------------------


@dataclass
class ChunkPlan:
    chunks: list  # index arrays into the training rows
    chunk_size: int
    min_tail: int
    seed: int

    @property
    def sizes(self) -> list[int]:
        return [len(c) for c in self.chunks]


def make_chunks(train_size: int, chunk_size: int = 500, min_tail: int = 50,
                seed: int = 0) -> ChunkPlan:
    """Shuffle ``range(train_size)`` and cut it into blocks of ``chunk_size``.

    A trailing block shorter than ``min_tail`` is merged into the block before
    it; a longer one stands alone.
    """
    if chunk_size < 2:
        raise ValueError("chunk_size must be >= 2")
    if train_size < 1:
        raise ValueError("train_size must be >= 1")
    order = np.random.default_rng(seed).permutation(train_size)
    chunks = [order[s : s + chunk_size] for s in range(0, train_size, chunk_size)]
    if len(chunks) > 1 and len(chunks[-1]) < min_tail:
        tail = chunks.pop()
        chunks[-1] = np.concatenate([chunks[-1], tail])
    return ChunkPlan(chunks, chunk_size, min_tail, seed)


# -- ensemble ----------------------------------------------------------------


@dataclass
class ChunkMember:
    chunk_id: int
    model: TrainedSvm
    path: Optional[str] = None
    train_seconds: float = 0.0
    size: int = 0


@dataclass
class ChunkEnsemble:
    members: list
    threshold: Optional[float] = None
    tuning_curve: list = field(default_factory=list)  # (threshold, precision, recall, f1)
    skipped: list = field(default_factory=list)  # chunk ids without a model
    warnings: list = field(default_factory=list)
    scaling: Optional[ScalingParams] = None
    seed: int = 0
    config_digest: str = ""
    tune_metric: str = "f1"

    @property
    def n(self) -> int:
        return len(self.members)


def _fit_chunk(job):
    chunk_id, X, y, kernel, C, tol, max_passes, scaling, meta = job
    t0 = time.perf_counter()
    model = fit_svc(X, y, kernel, C=C, tol=tol, max_passes=max_passes, scaling=scaling,
                    metadata={**meta, "chunk_id": chunk_id, "C": C, "n_train": len(y)})
    return model, time.perf_counter() - t0


def train_chunks(train: LabeledDataset, plan: ChunkPlan, kernel: KernelBinding,
                 C: float = 1.0, tol: float = 1e-3, model_dir=None,
                 max_passes: int = 200, scaling: Optional[ScalingParams] = None,
                 workers: int = 1, seed: int = 0,
                 metadata: Optional[dict] = None) -> ChunkEnsemble:
    """Train one SVC per chunk; chunks holding a single class are skipped."""
    covered = np.sort(np.concatenate(plan.chunks)) if plan.chunks else np.zeros(0)
    if covered.size != len(train) or not np.array_equal(covered, np.arange(len(train))):
        raise ValueError("chunk plan does not cover the training set")

    jobs, skipped, warnings = [], [], []
    for cid, idx in enumerate(plan.chunks):
        y = train.labels[idx]
        if len(np.unique(y)) < 2:
            msg = f"chunk {cid} ({len(idx)} rows) holds a single class; skipped"
            log.warning(msg)
            skipped.append(cid)
            warnings.append(msg)
            continue
        jobs.append((cid, train.features[idx], y, kernel, C, tol, max_passes, scaling,
                     dict(metadata or {})))
    if not jobs:
        raise EnsembleError("every chunk holds a single class; nothing to train")

    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_fit_chunk, jobs))
    else:
        results = [_fit_chunk(j) for j in jobs]

    members = []
    for job, (model, secs) in zip(jobs, results):
        cid = job[0]
        path = None
        if model_dir is not None:
            model_dir = Path(model_dir)
            model_dir.mkdir(parents=True, exist_ok=True)
            path = model_dir / f"chunk_{cid:03d}.qsvm"
            path.write_bytes(model_bytes(model))
            path = str(path)
        members.append(ChunkMember(cid, model, path, secs, len(job[2])))
    return ChunkEnsemble(members, skipped=skipped, warnings=warnings, scaling=scaling,
                         seed=seed)


def member_votes(ensemble: ChunkEnsemble, X) -> np.ndarray:
    """0/1 votes, shape ``(n_models, n_samples)``."""
    return np.stack([predict(m.model, X) for m in ensemble.members]) if ensemble.members \
        else np.zeros((0, 0), dtype=np.int64)


def aggregate(ensemble: ChunkEnsemble, X) -> np.ndarray:
    """Vote fraction per instance: (number of buggy votes) / n."""
    if ensemble.n == 0:
        raise EnsembleError("ensemble has no models")
    counts = member_votes(ensemble, X).sum(axis=0)
    return counts / ensemble.n


def _metric_index(metric: str) -> int:
    try:
        return {"precision": 1, "recall": 2, "f1": 3}[metric]
    except KeyError:
        raise ValueError(f"unknown tuning metric {metric!r}") from None


def select_threshold(fractions, labels, metric: str = "f1", prefer: str = "smallest"):
    """Best cut over the candidate thresholds {0} and every fraction present.

    Between consecutive achievable fractions the predicted set does not
    change, so no other threshold can do better. Returns ``(tau, curve)``.
    """
    f = np.asarray(fractions, dtype=float)
    y = np.asarray(labels, dtype=np.int64)
    if f.shape != y.shape:
        raise ValueError("fractions and labels differ in length")
    if y.sum() == 0:
        raise ValueError("tuning labels contain no positive (buggy) instance")
    if prefer not in ("smallest", "largest"):
        raise ValueError(f"unknown tie break {prefer!r}")
    k = _metric_index(metric)
    curve = []
    for tau in np.union1d(f, [0.0]):
        _, p, r, f1 = basic_metrics(confusion(y, (f >= tau).astype(np.int64)))
        curve.append((float(tau), p, r, f1))
    best = max(c[k] for c in curve)
    winners = [c[0] for c in curve if c[k] == best]
    tau = winners[0] if prefer == "smallest" else winners[-1]
    return tau, curve


def tune_threshold(ensemble: ChunkEnsemble, X_tune, y_tune, metric: str = "f1",
                   prefer: str = "smallest") -> float:
    tau, curve = select_threshold(aggregate(ensemble, X_tune), y_tune, metric, prefer)
    ensemble.threshold = tau
    ensemble.tuning_curve = curve
    ensemble.tune_metric = metric
    return tau


def threshold_labels(fractions, tau: float) -> np.ndarray:
    return (np.asarray(fractions) >= tau).astype(np.int64)


def global_predict(ensemble: ChunkEnsemble, X) -> np.ndarray:
    if ensemble.threshold is None:
        raise EnsembleError("aggregation threshold is not set; run tune_threshold first")
    return threshold_labels(aggregate(ensemble, X), ensemble.threshold)


def rank_members(ensemble: ChunkEnsemble, X_tune, y_tune) -> list[tuple[int, float]]:
    """(chunk_id, tuning F1) best first; ties keep chunk order."""
    scored = []
    for m in ensemble.members:
        _, _, _, f1 = basic_metrics(confusion(y_tune, predict(m.model, X_tune)))
        scored.append((m.chunk_id, f1))
    return sorted(scored, key=lambda s: -s[1])


# -- manifest ----------------------------------------------------------------


def _curve_csv(curve) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["threshold", "precision", "recall", "f1"])
    for row in curve:
        w.writerow([repr(float(v)) for v in row])
    return buf.getvalue()


def _parse_curve(text: str) -> list:
    rows = list(csv.reader(io.StringIO(text)))
    return [tuple(float(v) for v in r) for r in rows[1:] if r]


def save_manifest(ensemble: ChunkEnsemble, path) -> None:
    """JSON manifest; model paths are stored relative to the manifest."""
    path = Path(path)
    models = []
    for m in ensemble.members:
        if m.path is None:
            raise EnsembleError(f"chunk {m.chunk_id} was never written to disk")
        p = Path(m.path)
        try:
            rel = p.resolve().relative_to(path.parent.resolve())
        except ValueError:
            rel = p.resolve()
        models.append({"chunk_id": m.chunk_id, "path": rel.as_posix(),
                       "sha256": file_sha256(p), "size": m.size})
    doc = {
        "format": "qdefect-ensemble",
        "version": MANIFEST_VERSION,
        "n": ensemble.n,
        "models": models,
        "skipped_chunks": list(ensemble.skipped),
        "threshold": ensemble.threshold,
        "tune_metric": ensemble.tune_metric,
        "tuning_curve_csv": _curve_csv(ensemble.tuning_curve),
        "scaling": None if ensemble.scaling is None else ensemble.scaling.to_dict(),
        "seed": ensemble.seed,
        "config_digest": ensemble.config_digest,
    }
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def load_manifest(path, verify: bool = True) -> ChunkEnsemble:
    path = Path(path)
    doc = json.loads(path.read_text(encoding="utf-8"))
    if doc.get("format") != "qdefect-ensemble":
        raise EnsembleError(f"{path} is not an ensemble manifest")
    if doc.get("version") != MANIFEST_VERSION:
        raise EnsembleError(f"manifest version {doc.get('version')}, expected {MANIFEST_VERSION}")
    members = []
    for entry in doc["models"]:
        p = Path(entry["path"])
        if not p.is_absolute():
            p = path.parent / p
        cid = entry["chunk_id"]
        try:
            if verify and file_sha256(p) != entry["sha256"]:
                raise EnsembleError("checksum differs from manifest")
            model = load_model(p)
        except (OSError, ValueError, EnsembleError) as exc:
            raise EnsembleError(f"chunk {cid}: cannot load {p}: {exc}") from exc
        members.append(ChunkMember(cid, model, str(p), 0.0, entry.get("size", 0)))
    scaling = ScalingParams.from_dict(doc["scaling"]) if doc.get("scaling") else None
    return ChunkEnsemble(members, doc.get("threshold"), _parse_curve(doc["tuning_curve_csv"]),
                         doc.get("skipped_chunks", []), [], scaling, doc.get("seed", 0),
                         doc.get("config_digest", ""), doc.get("tune_metric", "f1"))


# -- single-model training (STAF and baselines) -----------------------------


def fit_algorithm(algorithm: str, train: LabeledDataset, cfg: ExperimentConfig,
                  scaling: Optional[ScalingParams] = None):
    """One directly-trained model: SVC (RBF), QSVC (quantum SMO) or PQSVC (Pegasos)."""
    X, y = train.features, train.labels
    meta = {"algorithm": algorithm, "n_train": len(train)}
    if algorithm == "SVC":
        gamma = cfg.rbf_gamma if cfg.rbf_gamma is not None else default_rbf_gamma(X)
        return fit_svc(X, y, KernelBinding.rbf(gamma), cfg.svm_C, cfg.svm_tol,
                       cfg.svm_max_passes, scaling, meta)
    kernel = KernelBinding.quantum(cfg.feature_map_spec(train.num_features))
    if algorithm == "QSVC":
        return fit_svc(X, y, kernel, cfg.svm_C, cfg.svm_tol, cfg.svm_max_passes, scaling,
                       meta)
    if algorithm == "PQSVC":
        return train_pegasos(X, y, kernel, cfg.pegasos_C, cfg.pegasos_steps,
                             cfg.pegasos_seed, scaling, meta)
    raise ValueError(f"unknown algorithm {algorithm!r}")


def evaluate_model(name: str, model, test: LabeledDataset, **extra) -> EvalReport:
    return make_report(name, test.labels, model_predict(model, test.features),
                       model_scores(model, test.features), **extra)


def staf_train(train: LabeledDataset, test: LabeledDataset, algorithms,
               cfg: ExperimentConfig, model_dir=None,
               scaling: Optional[ScalingParams] = None, metadata: Optional[dict] = None):
    """Train each algorithm on the whole (small) training set and evaluate on test.

    Returns ``(reports, models)`` keyed by algorithm name.
    """
    if "QSVC" in algorithms and len(train) > cfg.staf_cap:
        raise ValueError(
            f"STAF mode trains QSVC directly only up to {cfg.staf_cap} rows; "
            f"got {len(train)} (use chunked mode)"
        )
    reports, models = {}, {}
    for alg in algorithms:
        model = fit_algorithm(alg, train, cfg, scaling)
        model.metadata.update(metadata or {})
        extra = {}
        if model_dir is not None:
            Path(model_dir).mkdir(parents=True, exist_ok=True)
            p = Path(model_dir) / f"{alg.lower()}.qsvm"
            p.write_bytes(model_bytes(model))
            extra["model_file"] = p.name
        models[alg] = model
        reports[alg] = evaluate_model(alg, model, test, **extra)
    return reports, models
