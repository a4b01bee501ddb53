"""Reproduce the interval-tradeoff table; writes results/interval-tradeoff.csv and prints it."""

import sys
from pathlib import Path

from veriml.experiments import EXPERIMENTS, write_csv

if __name__ == "__main__":
    seed = int(sys.argv[1]) if len(sys.argv) > 1 else 0
    rows = EXPERIMENTS["interval-tradeoff"](seed=seed)
    write_csv(rows, Path(__file__).resolve().parents[1] / "results" / "interval-tradeoff.csv")
    write_csv(rows)
