"""Published split sizes of the fourteen JIT defect datasets.

``PUBLISHED_SPLITS[name] = (train, tune, test, total)``. Test sizes are not a fixed
fraction of the total for the smaller projects, so ``SplitSpec.test_count`` pins the
test count; the tune size then follows from rounding 10% of train.
"""
from __future__ import annotations

from pathlib import Path
from typing import Optional

from .dataio import SplitSpec

PUBLISHED_SPLITS = {
    "AnySoftK": (6883, 688, 1721, 8604),
    "Kiwis": (4905, 491, 1227, 6132),
    "Facebook": (3523, 352, 881, 4404),
    "Jm1": (3369, 337, 843, 4212),
    "OpenStack": (936, 94, 404, 1340),
    "Camel": (928, 93, 400, 1328),
    "Jackrabbit": (556, 56, 240, 796),
    "QT": (472, 47, 204, 676),
    "Bitcoin": (460, 46, 200, 660),
    "Tomcat": (452, 45, 194, 646),
    "Ambari": (410, 41, 178, 588),
    "Mongo": (368, 37, 158, 526),
    "Oozie": (358, 36, 156, 514),
    "Lucene": (348, 35, 150, 498),
}


def published_split_spec(name: str, seed: int = 0) -> SplitSpec:
    _, _, test, _ = PUBLISHED_SPLITS[name]
    return SplitSpec(test_fraction=0.2, tune_fraction_of_train=0.10, seed=seed,
                     test_count=test)


def match_dataset(path) -> Optional[str]:
    """Dataset name whose lower-cased form occurs in the file name, if any."""
    stem = Path(path).name.lower()
    hits = [n for n in PUBLISHED_SPLITS if n.lower() in stem]
    return max(hits, key=len) if hits else None
