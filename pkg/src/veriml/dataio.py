"""Datasets: CSV ingestion with min-max scaling, bucketing, and seeded synthetic sets."""

from __future__ import annotations

import csv
import hashlib
import math
import struct
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import Sequence

from .fixedpoint import encode_raw
from .prng import PinnedPRNG

DATA_MAGIC = b"VMLD"


@dataclass
class Dataset:
    features: list[list[int]]  # raw at scale 2^frac_bits
    labels: list[int]  # raw at 2^frac_bits for "real", class index for "class"
    frac_bits: int
    name: str = ""
    label_kind: str = "real"
    n_classes: int = 0
    _digest: str | None = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if len(self.features) != len(self.labels):
            raise ValueError("features and labels differ in length")
        if self.features and len({len(r) for r in self.features}) != 1:
            raise ValueError("ragged feature rows")

    @property
    def n(self) -> int:
        return len(self.features)

    @property
    def d(self) -> int:
        return len(self.features[0]) if self.features else 0

    def canonical_bytes(self) -> bytes:
        kind = 0 if self.label_kind == "real" else 1
        out = [DATA_MAGIC, struct.pack("<QQQBQ", self.n, self.d, self.frac_bits, kind, self.n_classes)]
        for row, y in zip(self.features, self.labels):
            out.append(b"".join(v.to_bytes(16, "little", signed=True) for v in row))
            out.append(y.to_bytes(16, "little", signed=True))
        return b"".join(out)

    @property
    def digest(self) -> str:
        if self._digest is None:
            self._digest = hashlib.sha256(self.canonical_bytes()).hexdigest()
        return self._digest

    def subset(self, rows: Sequence[int], name: str | None = None) -> Dataset:
        return Dataset([self.features[r] for r in rows], [self.labels[r] for r in rows], self.frac_bits,
                       name or self.name, self.label_kind, self.n_classes)

    def real_features(self) -> list[list[float]]:
        s = float(1 << self.frac_bits)
        return [[v / s for v in row] for row in self.features]

    def real_labels(self) -> list[float]:
        if self.label_kind != "real":
            return [float(y) for y in self.labels]
        s = float(1 << self.frac_bits)
        return [y / s for y in self.labels]


def _minmax(cols: list[list[float]]) -> list[list[Fraction]]:
    out = []
    for col in cols:
        lo, hi = min(col), max(col)
        if hi == lo:
            out.append([Fraction(0)] * len(col))
        else:
            span = Fraction(hi) - Fraction(lo)
            out.append([(Fraction(v) - Fraction(lo)) / span for v in col])
    return out


def load_csv(path: str | Path, label_col: int = -1, l: int = 32, label_kind: str = "real",
             header: bool | None = None) -> Dataset:
    """Min-max scale every feature (and real labels) to [0, 1], then encode at 2^l."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r]
    if not rows:
        raise ValueError(f"{path}: empty file")
    if header is None:
        try:
            [float(x) for x in rows[0]]
            header = False
        except ValueError:
            header = True
    if header:
        rows = rows[1:]
    width = len(rows[0])
    for k, r in enumerate(rows):
        if len(r) != width:
            raise ValueError(f"{path}: row {k} has {len(r)} fields, expected {width}")
    try:
        table = [[float(x) for x in r] for r in rows]
    except ValueError as e:
        raise ValueError(f"{path}: non-numeric field ({e})") from None
    lc = label_col % width
    feats = [[row[j] for row in table] for j in range(width) if j != lc]
    labels = [row[lc] for row in table]
    cols = _minmax(feats)
    X = [[encode_raw(cols[j][i], l) for j in range(len(cols))] for i in range(len(table))]
    if label_kind == "real":
        Y = [encode_raw(v, l) for v in _minmax([labels])[0]]
        ncls = 0
    else:
        classes = sorted(set(labels))
        Y = [classes.index(v) for v in labels]
        ncls = len(classes)
    return Dataset(X, Y, l, Path(path).stem, label_kind, ncls)


@dataclass
class HistogramSet:
    edges: list[list[float]]  # per feature, k_f + 1 edges
    bins: list[list[int]]  # per sample, bin index of each feature
    k_bins: list[int]
    root: list[list[list[int]]]  # [class][feature][bin] counts

    @property
    def total_bins(self) -> int:
        return sum(self.k_bins)

    @property
    def input_size(self) -> int:
        """Values a histogram holds per class: sum of bins, i.e. k*d for uniform bins."""
        return self.total_bins


def bucketize(ds: Dataset, k_bins: int | Sequence[int]) -> HistogramSet:
    """Equal-width bins per feature over the observed range."""
    d = ds.d
    ks = [k_bins] * d if isinstance(k_bins, int) else list(k_bins)
    if len(ks) != d or min(ks) < 2:
        raise ValueError("need k_bins >= 2 for every feature")
    edges, bins = [], [[0] * d for _ in range(ds.n)]
    for j in range(d):
        col = [row[j] for row in ds.features]
        lo, hi = min(col), max(col)
        k = ks[j]
        edges.append([(lo + (hi - lo) * t / k) / (1 << ds.frac_bits) for t in range(k + 1)])
        for i, v in enumerate(col):
            bins[i][j] = 0 if hi == lo else min((v - lo) * k // (hi - lo), k - 1)
    ncls = max(ds.n_classes, 1)
    root = [[[0] * ks[j] for j in range(d)] for _ in range(ncls)]
    for i in range(ds.n):
        c = ds.labels[i] if ds.label_kind == "class" else 0
        for j in range(d):
            root[c][j][bins[i][j]] += 1
    return HistogramSet(edges, bins, ks, root)


def synth(kind: str, n: int, d: int, seed: int, l: int = 32, **kw) -> Dataset:
    """Seeded synthetic data: regression | binary | blobs | multiclass."""
    if n < 1 or d < 1:
        raise ValueError("n and d must be >= 1")
    rng = PinnedPRNG(seed, f"synth-{kind}")
    if kind == "regression":
        noise = float(kw.get("noise", 0.05))
        w = [rng.uniform(-1, 1) for _ in range(d)]
        X = [[rng.random() for _ in range(d)] for _ in range(n)]
        Y = [sum(a * b for a, b in zip(x, w)) + noise * rng.gauss() for x in X]
        ds = Dataset([[encode_raw(v, l) for v in x] for x in X], [encode_raw(y, l) for y in Y], l,
                     "regression", "real")
        ds.true_weights = w
        return ds
    if kind == "binary":
        noise = float(kw.get("noise", 0.1))
        w = [rng.uniform(-1, 1) for _ in range(d)]
        X = [[rng.random() for _ in range(d)] for _ in range(n)]
        off = -sum(w) / 2
        Y = [1 if sum(a * b for a, b in zip(x, w)) + off + noise * rng.gauss() > 0 else 0 for x in X]
        return Dataset([[encode_raw(v, l) for v in x] for x in X], Y, l, "binary", "class", 2)
    if kind in ("blobs", "multiclass"):
        k = int(kw.get("k", kw.get("classes", 3)))
        sigma = float(kw.get("sigma", 0.02))
        centers = kw.get("centers") or [[rng.uniform(0.2, 0.8) for _ in range(d)] for _ in range(k)]
        X, Y = [], []
        for i in range(n):
            c = rng.randbelow(k)
            X.append([min(max(m + sigma * rng.gauss(), 0.0), 1.0) for m in centers[c]])
            Y.append(c)
        ds = Dataset([[encode_raw(v, l) for v in x] for x in X], Y, l, kind, "class", k)
        ds.centers = centers
        return ds
    raise ValueError(f"unknown synthetic kind {kind!r}")


def separated_centers(k: int, d: int, seed: int, min_gap: float = 0.3) -> list[list[float]]:
    """Rejection-sampled centers at pairwise distance >= min_gap."""
    rng = PinnedPRNG(seed, "centers")
    out: list[list[float]] = []
    while len(out) < k:
        c = [rng.uniform(0.15, 0.85) for _ in range(d)]
        if all(math.dist(c, o) >= min_gap for o in out):
            out.append(c)
    return out
