"""Desk-scale end-to-end run on synthetic blobs, chunked mode.

    python3 scripts/desk_run.py --out out/desk --seed 0
"""
import argparse
import time

from qdefect.cli import cmd_run
from qdefect.config import ExperimentConfig


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="out/desk")
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--n", type=int, default=600)
    ap.add_argument("--chunk-size", type=int, default=200)
    args = ap.parse_args()

    cfg = ExperimentConfig(synthetic_n=args.n, synthetic_d=4, synthetic_separation=4.0,
                           seed=args.seed, mode="chunked", chunk_size=args.chunk_size,
                           out=args.out)
    t0 = time.perf_counter()
    res = cmd_run(cfg)
    print(f"{'algorithm':<10}" + "".join(f"{c:>10}" for c in
                                         ("acc", "prec", "rec", "f1", "auc", "mcc")))
    for rep in res["reports"]:
        print(f"{rep.algorithm:<10}" + "".join(f"{v:>10.4f}" for v in rep.row()[1:]))
    print(f"wall {time.perf_counter() - t0:.2f}s, artifacts in {res['out']}")


if __name__ == "__main__":
    main()
