"""Wall-clock timing of chunk training and of batch vs one-at-a-time prediction.

Test-1 predicts the whole test matrix in one call; Test-2 loops over the
rows one by one. Both must return the same labels; that is asserted, while
the timings are only recorded.
"""
from __future__ import annotations

import csv
import time
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .ensemble import ChunkEnsemble, global_predict, make_chunks, train_chunks
from .svm import model_predict


class PredictionMismatch(AssertionError):
    pass


@dataclass(frozen=True)
class TimingRecord:
    phase: str  # train | test1 | test2
    chunk_id: int
    wall_seconds: float
    instances: int


def _predict_fn(model):
    if isinstance(model, ChunkEnsemble):
        return lambda X: global_predict(model, X)
    return lambda X: model_predict(model, X)


def bench_predict(model, X, repeats: int = 3, chunk_id: int = -1):
    """Time Test-1 and Test-2 prediction; returns ``(test1, test2, equal)``.

    Each timing is the minimum over ``repeats`` runs. Raises
    ``PredictionMismatch`` if the two strategies ever disagree.
    """
    if repeats < 1:
        raise ValueError("repeats must be >= 1")
    fn = _predict_fn(model)
    X = np.asarray(X, dtype=float)
    m = X.shape[0] if X.ndim == 2 else 0
    t1 = t2 = float("inf")
    batch = single = None
    for _ in range(repeats):
        s = time.perf_counter()
        batch = fn(X)
        t1 = min(t1, time.perf_counter() - s)

        s = time.perf_counter()
        single = np.array([fn(X[i : i + 1])[0] for i in range(m)], dtype=np.int64)
        t2 = min(t2, time.perf_counter() - s)
    batch = np.asarray(batch, dtype=np.int64)
    equal = batch.shape == single.shape and bool(np.array_equal(batch, single))
    if not equal:
        raise PredictionMismatch(
            f"chunk {chunk_id}: batch and per-instance predictions differ at "
            f"{int(np.sum(batch != single))} of {m} rows"
        )
    return (TimingRecord("test1", chunk_id, t1, m), TimingRecord("test2", chunk_id, t2, m),
            equal)


def train_records(ensemble: ChunkEnsemble) -> list[TimingRecord]:
    return [TimingRecord("train", m.chunk_id, m.train_seconds, m.size)
            for m in ensemble.members]


def bench_train(train, kernel, chunk_size: int = 500, min_tail: int = 50, seed: int = 0,
                C: float = 1.0, tol: float = 1e-3, model_dir=None, workers: int = 1):
    """Train chunk models with per-chunk wall timing; returns ``(ensemble, records)``."""
    plan = make_chunks(len(train), chunk_size, min_tail, seed)
    ens = train_chunks(train, plan, kernel, C=C, tol=tol, model_dir=model_dir,
                       workers=workers, seed=seed)
    return ens, train_records(ens)


def write_timings_csv(records, path) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["phase", "chunk_id", "instances", "wall_seconds"])
        for r in records:
            w.writerow([r.phase, r.chunk_id, r.instances, repr(float(r.wall_seconds))])
