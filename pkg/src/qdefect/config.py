"""Experiment configuration. Every default lives here."""
from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Optional

from .dataio import SplitSpec
from .qkernel import FeatureMapSpec

ALGORITHMS = ("SVC", "PQSVC", "QSVC")

# keys that do not change any result and are left out of the digest
_UNDIGESTED = {"out", "workers"}


@dataclass
class ExperimentConfig:
    dataset: str = ""  # CSV path; empty means generate synthetic blobs
    synthetic_n: int = 600
    synthetic_d: int = 4
    synthetic_separation: float = 4.0

    test_fraction: float = 0.2
    test_count: Optional[int] = None
    tune_fraction: float = 0.10
    tune_disjoint: bool = False
    scale_low: float = 0.0
    # Z-map phases are 2x: x = 0 and x = pi give the same state, so the
    # range must stay inside a half period
    scale_high: float = math.pi / 2

    feature_map: str = "Z"
    reps: int = 2
    entanglement: str = "linear"

    algorithms: list = field(default_factory=lambda: list(ALGORITHMS))
    svm_C: float = 1.0
    svm_tol: float = 1e-3
    svm_max_passes: int = 200
    rbf_gamma: Optional[float] = None  # None: 1 / (d * mean feature variance)
    pegasos_steps: int = 1000
    pegasos_C: float = 1000.0

    mode: str = "auto"  # auto | staf | chunked
    staf_cap: int = 500
    chunk_size: int = 500
    min_tail: int = 50
    tune_metric: str = "f1"
    tie_break: str = "smallest"
    top_k: int = 3

    bench: bool = True
    bench_repeats: int = 3
    workers: int = 1
    seed: int = 0
    out: str = "out"

    def __post_init__(self):
        bad = [a for a in self.algorithms if a not in ALGORITHMS]
        if bad:
            raise ValueError(f"unknown algorithm(s) {bad}; choose from {ALGORITHMS}")
        if self.mode not in ("auto", "staf", "chunked"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.tune_metric not in ("f1", "precision", "recall"):
            raise ValueError(f"unknown tune metric {self.tune_metric!r}")
        if self.tie_break not in ("smallest", "largest"):
            raise ValueError(f"unknown tie break {self.tie_break!r}")

    # seeds for the independent random streams
    @property
    def split_seed(self) -> int:
        return self.seed

    @property
    def chunk_seed(self) -> int:
        return self.seed + 1

    @property
    def pegasos_seed(self) -> int:
        return self.seed + 2

    def split_spec(self) -> SplitSpec:
        return SplitSpec(self.test_fraction, self.tune_fraction, self.split_seed,
                         self.test_count)

    def feature_map_spec(self, num_features: int) -> FeatureMapSpec:
        return FeatureMapSpec(self.feature_map, num_features, self.reps, self.entanglement)

    def to_dict(self) -> dict:
        return asdict(self)

    def digest(self) -> str:
        d = {k: v for k, v in asdict(self).items() if k not in _UNDIGESTED}
        blob = json.dumps(d, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:16]

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config key(s): {sorted(unknown)}")
        return cls(**d)


def load_config(path) -> ExperimentConfig:
    return ExperimentConfig.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def save_config(cfg: ExperimentConfig, path) -> None:
    Path(path).write_text(json.dumps(cfg.to_dict(), indent=2, sort_keys=True) + "\n",
                          encoding="utf-8")
