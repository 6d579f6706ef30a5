"""Linear-operator experiments: the two-step bound table, r-factor comparison,
scalar tight case and the w0 grid.

    python scripts/linear_experiments.py --out results/linear
"""

import argparse
import sys
from pathlib import Path

from andersonfp.expcli import main as run

RUNS = [
    ("bound_w1", ["--experiment", "linear-bound", "--seed-count", "100"]),
    ("bound_w1_damped", ["--experiment", "linear-bound", "--seed-count", "50", "--beta", "0.7"]),
    ("rate_w2", ["--experiment", "linear-rate", "--seed-count", "100"]),
    ("scalar_tight", ["--experiment", "scalar-tight"]),
    ("w0_table", ["--experiment", "w0-table"]),
]


def parse_args():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--out", default="results/linear")
    return ap.parse_args()


if __name__ == "__main__":
    args = parse_args()
    status = 0
    for name, argv in RUNS:
        print(f"== {name}", file=sys.stderr)
        status |= run(argv + ["--out", str(Path(args.out) / name)])
    sys.exit(status)
