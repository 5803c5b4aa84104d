"""Split sizes for the fourteen defect datasets.

Without arguments, prints the computed train/tune/test sizes next to the
published ones. With ``--data DIR``, splits every CSV in DIR whose name
matches a dataset and writes train/tune/test files under ``--out``.
"""
import argparse
from pathlib import Path

from qdefect.cli import cmd_split
from qdefect.config import ExperimentConfig
from qdefect.dataio import SplitSpec, load_csv
from qdefect.datasets import PUBLISHED_SPLITS, match_dataset, published_split_spec


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data", help="directory of dataset CSVs")
    ap.add_argument("--out", default="out/splits")
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    print(f"{'dataset':<12}{'total':>7}{'train':>7}{'tune':>6}{'test':>6}  "
          f"{'20% rule':>16}  match")
    for name, (train, tune, test, total) in PUBLISHED_SPLITS.items():
        got = published_split_spec(name).sizes(total)
        frac = SplitSpec(0.2, 0.10).sizes(total)
        flag = "yes" if got == (train, tune, test) else "NO"
        print(f"{name:<12}{total:>7}{got[0]:>7}{got[1]:>6}{got[2]:>6}  {str(frac):>16}  {flag}")

    if args.data:
        for path in sorted(Path(args.data).glob("*.csv")):
            name = match_dataset(path)
            if name is None:
                print(f"skip {path.name}: no matching dataset")
                continue
            cfg = ExperimentConfig(dataset=str(path), test_count=PUBLISHED_SPLITS[name][2],
                                   seed=args.seed, out=str(Path(args.out) / name))
            out = cmd_split(cfg)
            sizes = [len(load_csv(out / f"{p}.csv")) for p in ("train", "tune", "test")]
            print(f"{name}: wrote {out} sizes {sizes}")


if __name__ == "__main__":
    main()
