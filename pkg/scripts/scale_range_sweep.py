"""Global QSVC F1 over seeds for two feature scaling ranges, [0, pi/2] and [0, pi].

The Z map encodes x through phases 2x, so 0 and pi give the same state; this
sweep shows what that costs on the desk-scale blobs.
"""
import argparse
import math
import tempfile

import numpy as np

from qdefect.cli import cmd_run
from qdefect.config import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--seeds", type=int, default=10)
    args = ap.parse_args()
    for label, high in (("pi/2", math.pi / 2), ("pi", math.pi)):
        f1s, mccs = [], []
        for seed in range(args.seeds):
            with tempfile.TemporaryDirectory() as tmp:
                cfg = ExperimentConfig(seed=seed, mode="chunked", chunk_size=200,
                                       scale_high=high, bench=False, out=tmp)
                g = [r for r in cmd_run(cfg)["reports"] if r.algorithm == "G. QSVC"][0]
                f1s.append(g.metrics.f1)
                mccs.append(g.metrics.mcc)
        print(f"[0, {label:>4}]  F1 mean {np.mean(f1s):.4f} min {np.min(f1s):.4f}   "
              f"MCC mean {np.mean(mccs):.4f} min {np.min(mccs):.4f}")


if __name__ == "__main__":
    main()
