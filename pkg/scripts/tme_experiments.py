"""Tyler's M-estimator experiments: FP against AA(m), modified AA with the
local bound, the Jacobian symmetry check, and the formulation comparison.

    python scripts/tme_experiments.py --out results/tme --seeds 10
"""

import argparse
import sys
from pathlib import Path

from andersonfp.expcli import main as run


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/tme")
    ap.add_argument("--seeds", type=int, default=10)
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    seeds = str(args.seeds)
    runs = []
    for model in ("model1", "model2"):
        runs += [
            (f"speed_{model}", ["--experiment", "tme-run", "--model", model, "--seed-count", seeds,
                                "--method", "fp,aa1,aa2,aa3", "--c0", "inf"]),
            (f"modified_{model}", ["--experiment", "tme-run", "--model", model,
                                   "--seed-count", seeds, "--method", "aa1,aa2,aa3",
                                   "--c0", "1e4"]),
        ]
    runs += [
        ("jacobian", ["--experiment", "tme-jacobian", "--seed-count", "5"]),
        ("compare", ["--experiment", "tme-compare"]),
    ]
    status = 0
    for name, argv in runs:
        print(f"== {name}", file=sys.stderr)
        status |= run(argv + ["--out", str(Path(args.out) / name)])
    sys.exit(status)
