"""Commit-metric datasets: CSV I/O, seeded splits, angle scaling, synthetic blobs."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np


class DataError(ValueError):
    pass


@dataclass
class LabeledDataset:
    features: np.ndarray
    labels: np.ndarray
    feature_names: list = field(default_factory=list)
    source: str = ""

    def __post_init__(self):
        self.features = np.asarray(self.features, dtype=float)
        if self.features.ndim == 1:
            self.features = self.features.reshape(-1, 1)
        self.labels = np.asarray(self.labels, dtype=np.int64)
        if self.features.shape[0] != self.labels.shape[0]:
            raise DataError("feature and label row counts differ")
        if not np.all((self.labels == 0) | (self.labels == 1)):
            raise DataError("labels must be 0/1")
        if not np.all(np.isfinite(self.features)):
            raise DataError("features must be finite")
        if not self.feature_names:
            self.feature_names = [f"f{i}" for i in range(self.features.shape[1])]

    def __len__(self) -> int:
        return self.labels.shape[0]

    @property
    def num_features(self) -> int:
        return self.features.shape[1]

    def subset(self, idx, source: Optional[str] = None) -> "LabeledDataset":
        idx = np.asarray(idx, dtype=np.int64)
        return LabeledDataset(self.features[idx], self.labels[idx],
                              list(self.feature_names), source or self.source)

    def with_features(self, features) -> "LabeledDataset":
        return LabeledDataset(features, self.labels.copy(), list(self.feature_names),
                              self.source)


def load_csv(path) -> LabeledDataset:
    """Read a headed CSV with a 0/1 ``label`` column; all other columns are features."""
    path = Path(path)
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise DataError(f"{path}: empty file")
        header = [h.strip() for h in header]
        if "label" not in header:
            raise DataError(f"{path}: no 'label' column")
        li = header.index("label")
        names = [h for k, h in enumerate(header) if k != li]
        feats, labels = [], []
        for r, row in enumerate(reader):
            if not row:
                continue
            if len(row) != len(header):
                raise DataError(f"{path}: row {r} has {len(row)} cells, expected {len(header)}")
            try:
                vals = [float(c) for c in row]
            except ValueError:
                raise DataError(f"{path}: row {r} has an unparsable cell") from None
            if not all(math.isfinite(v) for v in vals):
                raise DataError(f"{path}: row {r} has a missing or non-finite cell")
            lab = vals[li]
            if lab not in (0.0, 1.0):
                raise DataError(f"{path}: row {r} has non-binary label {row[li]!r}")
            labels.append(int(lab))
            feats.append([v for k, v in enumerate(vals) if k != li])
    if not labels:
        raise DataError(f"{path}: no data rows")
    return LabeledDataset(np.array(feats, dtype=float), np.array(labels), names, str(path))


def save_csv(ds: LabeledDataset, path) -> None:
    # repr() of a float is the shortest string that round-trips exactly
    with Path(path).open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(list(ds.feature_names) + ["label"])
        for x, y in zip(ds.features, ds.labels):
            w.writerow([repr(float(v)) for v in x] + [int(y)])


# -- splitting ---------------------------------------------------------------


@dataclass(frozen=True)
class SplitSpec:
    """How to carve a dataset into train / tune / test.

    ``test_count`` overrides ``test_fraction`` for datasets whose published
    test size is not a clean fraction of the total.
    """

    test_fraction: float = 0.2
    tune_fraction_of_train: float = 0.10
    seed: int = 0
    test_count: Optional[int] = None

    def __post_init__(self):
        if not 0 < self.test_fraction < 1:
            raise ValueError("test_fraction must be in (0, 1)")
        if not 0 < self.tune_fraction_of_train < 1:
            raise ValueError("tune_fraction_of_train must be in (0, 1)")

    def sizes(self, n: int) -> tuple[int, int, int]:
        """(train, tune, test) sizes for ``n`` rows."""
        if self.test_count is not None:
            n_test = int(self.test_count)
        else:
            n_test = math.ceil(round(n * self.test_fraction, 9))
        n_train = n - n_test
        n_tune = math.floor(n_train * self.tune_fraction_of_train + 0.5)
        if n_test <= 0 or n_train <= 0 or n_tune <= 0:
            raise DataError(
                f"split of {n} rows gives an empty part (train={n_train}, "
                f"tune={n_tune}, test={n_test})"
            )
        return n_train, n_tune, n_test


@dataclass
class SplitIndices:
    train: np.ndarray
    tune: np.ndarray  # subset of train
    test: np.ndarray

    def manifest_rows(self):
        """(row-index, part) pairs; tune rows also appear under train."""
        rows = [(int(i), "train") for i in self.train]
        rows += [(int(i), "tune") for i in self.tune]
        rows += [(int(i), "test") for i in self.test]
        return sorted(rows, key=lambda r: (r[0], r[1]))


def split_indices(n: int, spec: SplitSpec) -> SplitIndices:
    n_train, n_tune, n_test = spec.sizes(n)
    rng = np.random.default_rng(spec.seed)
    perm = rng.permutation(n)
    train = perm[:n_train]
    tune = train[rng.choice(n_train, size=n_tune, replace=False)]
    return SplitIndices(train=train, tune=tune, test=perm[n_train:])


def split(ds: LabeledDataset, spec: SplitSpec):
    """Seeded (train, tune, test) datasets with tune drawn from train."""
    if len(ds) == 0:
        raise DataError("cannot split an empty dataset")
    if len(np.unique(ds.labels)) < 2:
        raise DataError("dataset must contain both classes")
    idx = split_indices(len(ds), spec)
    return (ds.subset(idx.train, f"{ds.source}#train"),
            ds.subset(idx.tune, f"{ds.source}#tune"),
            ds.subset(idx.test, f"{ds.source}#test"))


def write_split_manifest(indices: SplitIndices, path) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write("row_index,part\n")
        for i, part in indices.manifest_rows():
            fh.write(f"{i},{part}\n")


# -- scaling -----------------------------------------------------------------


@dataclass
class ScalingParams:
    mins: np.ndarray
    maxs: np.ndarray
    low: float = 0.0
    high: float = math.pi

    def to_dict(self) -> dict:
        return {"mins": [float(v) for v in self.mins], "maxs": [float(v) for v in self.maxs],
                "low": self.low, "high": self.high}

    @classmethod
    def from_dict(cls, d: dict) -> "ScalingParams":
        return cls(np.asarray(d["mins"], dtype=float), np.asarray(d["maxs"], dtype=float),
                   float(d["low"]), float(d["high"]))


def fit_scaler(features, low: float = 0.0, high: float = math.pi) -> ScalingParams:
    X = np.atleast_2d(np.asarray(features, dtype=float))
    if X.shape[0] == 0:
        raise DataError("cannot fit a scaler on zero rows")
    return ScalingParams(X.min(axis=0), X.max(axis=0), low, high)


def apply_scaler(params: ScalingParams, features) -> np.ndarray:
    """Affine map of each feature's fitted [min, max] onto [low, high], clamped.

    Constant features map to the midpoint.
    """
    X = np.asarray(features, dtype=float)
    if X.size == 0:
        return X.reshape(0, params.mins.shape[0])
    X = np.atleast_2d(X)
    if X.shape[1] != params.mins.shape[0]:
        raise DataError(f"expected {params.mins.shape[0]} columns, got {X.shape[1]}")
    span = params.maxs - params.mins
    live = span > 0
    out = np.full(X.shape, 0.5 * (params.low + params.high))
    out[:, live] = params.low + (X[:, live] - params.mins[live]) / span[live] * (
        params.high - params.low)
    return np.clip(out, params.low, params.high)


# -- synthetic data ----------------------------------------------------------


def gen_synthetic(n: int, d: int, separation: float, seed: int = 0) -> LabeledDataset:
    """Two unit-variance Gaussian blobs, ``separation`` apart along the diagonal."""
    if n < 4 or d < 1:
        raise DataError("need n >= 4 and d >= 1")
    rng = np.random.default_rng(seed)
    n1 = n // 2
    n0 = n - n1
    shift = np.full(d, separation / math.sqrt(d))
    X = np.vstack([rng.standard_normal((n0, d)), rng.standard_normal((n1, d)) + shift])
    y = np.concatenate([np.zeros(n0, dtype=np.int64), np.ones(n1, dtype=np.int64)])
    order = rng.permutation(n)
    return LabeledDataset(X[order], y[order], [f"f{i}" for i in range(d)],
                          f"synthetic(n={n},d={d},sep={separation},seed={seed})")
