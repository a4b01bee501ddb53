"""Reproduce the sigmoid-table table; writes results/sigmoid-table.csv and prints it."""

import sys
from pathlib import Path

from veriml.experiments import EXPERIMENTS, write_csv

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    rows = EXPERIMENTS["sigmoid-table"](seed=seed)
    write_csv(rows, Path(__file__).resolve().parents[1] / "results" / "sigmoid-table.csv")
    write_csv(rows)
