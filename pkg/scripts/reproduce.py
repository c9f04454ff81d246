#!/usr/bin/env python3
"""Run both evaluation protocols on the public murmur dataset for every feature preset.

The dataset root comes from --data-dir or $MURMURSCALE_DATA. Results land in --out-dir,
one JSON file (plus manifest) per protocol and preset, and a summary table is printed.
"""
import argparse
import json
import os
import sys
from pathlib import Path

from murmurscale.cli import main as cli
from murmurscale.config import FEATURE_PRESETS


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--data-dir", default=os.environ.get("MURMURSCALE_DATA"))
    ap.add_argument("--out-dir", default="reproduction")
    ap.add_argument("--balanced-preset", default="table1-lr")
    ap.add_argument("--weighted-preset", default="table2-svm")
    ap.add_argument("--workers", type=int, default=os.cpu_count() or 1)
    args = ap.parse_args()
    if not args.data_dir:
        sys.exit("no dataset: pass --data-dir or set MURMURSCALE_DATA")
    out = Path(args.out_dir)
    out.mkdir(parents=True, exist_ok=True)

    for preset in FEATURE_PRESETS:
        bal = out / f"balanced-{preset}.json"
        if cli(["reproduce-balanced", "--data-dir", args.data_dir, "--out", str(bal),
                "--preset", args.balanced_preset, "--feature-preset", preset,
                "--workers", str(args.workers)]):
            sys.exit(f"balanced run failed for {preset}")
        matrix = out / f"balanced-{preset}.features.csv"
        wtd = out / f"weighted-{preset}.json"
        if cli(["reproduce-weighted", "--matrix", str(matrix), "--out", str(wtd),
                "--preset", args.weighted_preset, "--workers", str(args.workers)]):
            sys.exit(f"weighted run failed for {preset}")
        b = json.loads(bal.read_text())["mean"]
        w = json.loads(wtd.read_text())["report"]
        print(f"{preset:18s} balanced acc {100 * b['accuracy']:6.2f} auc {b['auc']:.3f} | "
              f"weighted acc {100 * w['accuracy']:6.2f} auc {w['auc']:.3f}")


if __name__ == "__main__":
    main()
