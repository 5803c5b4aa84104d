"""Binary classification metrics with 1 = buggy as the positive class.

Degenerate denominators give 0 rather than raising, so a classifier that
predicts one class everywhere still produces a full row of numbers.
"""
from __future__ import annotations

import csv
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.stats import rankdata

STAF_COLUMNS = ["precision", "recall", "f1", "roc_auc", "mcc"]
CHUNKED_COLUMNS = ["accuracy", "precision", "recall", "f1", "roc_auc", "mcc"]


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    fn: int
    tn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricSet:
    accuracy: float
    precision: float
    recall: float
    f1: float
    roc_auc: float
    mcc: float


def _binary(a, name: str) -> np.ndarray:
    a = np.asarray(a)
    if a.ndim != 1:
        raise ValueError(f"{name} must be one-dimensional")
    if not np.all((a == 0) | (a == 1)):
        raise ValueError(f"{name} must be 0/1")
    return a.astype(np.int64)


def confusion(labels, predictions) -> ConfusionMatrix:
    y = _binary(labels, "labels")
    p = _binary(predictions, "predictions")
    if y.shape != p.shape:
        raise ValueError(f"length mismatch: {y.size} labels vs {p.size} predictions")
    tp = int(np.sum((y == 1) & (p == 1)))
    fp = int(np.sum((y == 0) & (p == 1)))
    fn = int(np.sum((y == 1) & (p == 0)))
    tn = int(np.sum((y == 0) & (p == 0)))
    return ConfusionMatrix(tp, fp, fn, tn)


def basic_metrics(cm: ConfusionMatrix) -> tuple[float, float, float, float]:
    """(accuracy, precision, recall, f1)."""
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if cm.tp + cm.fp else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if cm.tp + cm.fn else 0.0
    # count form of the harmonic mean: one correctly rounded division
    f1 = 2 * cm.tp / (2 * cm.tp + cm.fp + cm.fn) if cm.tp else 0.0
    return accuracy, precision, recall, f1


def mcc(cm: ConfusionMatrix) -> float:
    if cm.total == 0:
        raise ValueError("empty confusion matrix")
    # python ints: the factor product overflows 64 bits for large sets
    tp, fp, fn, tn = int(cm.tp), int(cm.fp), int(cm.fn), int(cm.tn)
    denom = (tp + fp) * (tp + fn) * (tn + fp) * (tn + fn)
    if denom == 0:
        return 0.0
    return (tp * tn - fp * fn) / math.sqrt(denom)


def roc_auc(scores, labels) -> float:
    """Mann-Whitney AUC: P(random positive outscores random negative), ties half."""
    s = np.asarray(scores, dtype=float)
    y = _binary(labels, "labels")
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    n_pos = int(y.sum())
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise ValueError("ROC-AUC needs both classes")
    ranks = rankdata(s)
    u = ranks[y == 1].sum() - n_pos * (n_pos + 1) / 2
    return float(u / (n_pos * n_neg))


def pr_curve(scores, labels) -> list[tuple[float, float, float, float]]:
    """(threshold, precision, recall, f1) per distinct score, thresholds ascending.

    A sample is predicted positive iff its score >= threshold.
    """
    s = np.asarray(scores, dtype=float)
    y = _binary(labels, "labels")
    if s.shape != y.shape:
        raise ValueError("scores and labels differ in length")
    if y.sum() == 0:
        raise ValueError("PR curve needs at least one positive label")
    out = []
    for thr in np.unique(s):
        _, p, r, f = basic_metrics(confusion(y, (s >= thr).astype(np.int64)))
        out.append((float(thr), p, r, f))
    return out


def evaluate(labels, predictions, scores=None) -> tuple[ConfusionMatrix, MetricSet, str]:
    """All six metrics. ROC-AUC uses ``scores`` when given, else the hard labels.

    The third element names the ROC-AUC source ("score", "hard", or "n/a" when
    the labels hold one class and AUC is undefined, reported as NaN).
    """
    cm = confusion(labels, predictions)
    acc, p, r, f = basic_metrics(cm)
    source = "hard" if scores is None else "score"
    try:
        auc = roc_auc(predictions if scores is None else scores, labels)
    except ValueError:
        auc, source = float("nan"), "n/a"
    return cm, MetricSet(acc, p, r, f, auc, mcc(cm)), source


@dataclass
class EvalReport:
    algorithm: str
    confusion: ConfusionMatrix
    metrics: MetricSet
    roc_auc_source: str = "score"
    n_test: int = 0
    extra: dict = field(default_factory=dict)

    def row(self, columns=CHUNKED_COLUMNS) -> list:
        m = asdict(self.metrics)
        return [self.algorithm] + [m[c] for c in columns]

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "confusion": asdict(self.confusion),
            "metrics": asdict(self.metrics),
            "roc_auc_source": self.roc_auc_source,
            "n_test": self.n_test,
            "extra": self.extra,
        }


def make_report(algorithm: str, labels, predictions, scores=None, **extra) -> EvalReport:
    cm, ms, src = evaluate(labels, predictions, scores)
    return EvalReport(algorithm, cm, ms, src, int(np.asarray(labels).size), dict(extra))


def _fmt(v) -> str:
    return repr(float(v)) if isinstance(v, (float, np.floating)) else str(v)


def write_metrics_csv(reports, path, columns=CHUNKED_COLUMNS, digest: str = "",
                      seed: Optional[int] = None) -> None:
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm"] + list(columns) + ["roc_auc_source", "config_digest", "seed"])
        for rep in reports:
            w.writerow([_fmt(v) for v in rep.row(columns)]
                       + [rep.roc_auc_source, digest, "" if seed is None else seed])


def write_metrics_json(reports, path, mode: str, digest: str = "",
                       seed: Optional[int] = None) -> None:
    doc = {"mode": mode, "config_digest": digest, "seed": seed,
           "reports": [r.to_dict() for r in reports]}
    Path(path).write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def write_pr_curve_csv(curves, path, digest: str = "", seed: Optional[int] = None) -> None:
    """``curves`` maps (algorithm, split) to a list of PR points."""
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["algorithm", "split", "threshold", "precision", "recall", "f1",
                    "config_digest", "seed"])
        for (alg, part), curve in curves.items():
            for point in curve:
                w.writerow([alg, part] + [repr(float(v)) for v in point]
                           + [digest, "" if seed is None else seed])
