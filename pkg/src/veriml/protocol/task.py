"""Task description shared by both parties, batch schedule, and algorithm lookup."""

from __future__ import annotations

import hashlib
import json
import struct
from dataclasses import dataclass, replace
from dataclasses import field as dc_field
from functools import lru_cache

from ..commitment import field_capacity_ok
from ..dataio import Dataset, bucketize
from ..models.base import Algorithm, TrainConfig
from ..models.kmeans import KMeans
from ..models.linear import LinReg, LogReg
from ..models.nn import NN
from ..models.svm import SVM
from ..models.tree import Tree, TreeData
from ..prng import PinnedPRNG
from ..r1cs import FieldConfig, default_field, field_by_name

ALGORITHMS = {cls.kind: cls for cls in (LinReg, LogReg, NN, SVM, KMeans, Tree)}


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class TaskSpec:
    kind: str
    cfg: TrainConfig
    dims: dict
    dataset_digest: str = ""
    batch_seed: int = 1
    client_seed: int = 2
    interval: int = 50
    field: str = ""  # empty: the default field (VERIML_FIELD or the 254-bit prime)
    holdout: int = 0  # trailing rows reserved for the convergence metric
    strict_authenticity: bool = False
    extra: dict = dc_field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in ALGORITHMS:
            raise ConfigError(f"unknown algorithm {self.kind!r}")
        if self.interval < 1:
            raise ConfigError("checkpoint interval must be >= 1")

    def to_json(self) -> dict:
        return {
            "kind": self.kind, "cfg": self.cfg.to_json(), "dims": self.dims,
            "dataset_digest": self.dataset_digest, "batch_seed": self.batch_seed,
            "client_seed": self.client_seed, "interval": self.interval, "field": self.field_cfg.name,
            "holdout": self.holdout, "strict_authenticity": self.strict_authenticity, "extra": self.extra,
        }

    @classmethod
    def from_json(cls, obj: dict) -> TaskSpec:
        try:
            return cls(obj["kind"], TrainConfig.from_json(obj.get("cfg", {})), dict(obj["dims"]),
                       obj.get("dataset_digest", ""), int(obj.get("batch_seed", 1)),
                       int(obj.get("client_seed", 2)), int(obj.get("interval", 50)),
                       obj.get("field", ""), int(obj.get("holdout", 0)),
                       bool(obj.get("strict_authenticity", False)), dict(obj.get("extra", {})))
        except (KeyError, TypeError) as e:
            raise ConfigError(f"malformed task: {e}") from None

    def digest(self) -> str:
        return hashlib.sha256(json.dumps(self.to_json(), sort_keys=True).encode()).hexdigest()

    @property
    def field_cfg(self) -> FieldConfig:
        return field_by_name(self.field) if self.field else default_field()

    @property
    def p(self) -> int:
        return self.field_cfg.modulus

    def algorithm(self) -> Algorithm:
        return ALGORITHMS[self.kind](self.cfg, self.dims)

    def with_(self, **kw) -> TaskSpec:
        return replace(self, **kw)

    def check_field(self) -> None:
        d = self.algorithm().param_count()
        if not field_capacity_ok(self.cfg.frac_bits, self.cfg.int_budget, d, self.p):
            raise ConfigError(
                f"l={self.cfg.frac_bits} with a {self.cfg.int_budget}-bit budget and d={d} "
                f"can overflow the {self.p.bit_length()}-bit field"
            )


@lru_cache(maxsize=64)
def _permutation(seed: int, epoch: int, n: int) -> tuple[int, ...]:
    rng = PinnedPRNG(seed, b"shuffle" + struct.pack("<Q", epoch))
    return tuple(rng.shuffle(list(range(n))))


def steps_per_epoch(n: int, b: int) -> int:
    if b > n:
        raise ValueError(f"batch size {b} exceeds dataset size {n}")
    return n // b


def batch_indices(shared_seed: int, epoch: int, step: int, b: int, n: int) -> list[int]:
    """Contiguous slice of the epoch's Fisher-Yates permutation."""
    if step >= steps_per_epoch(n, b) or step < 0:
        raise ValueError(f"step {step} is outside an epoch of {n // b} batches")
    perm = _permutation(shared_seed, epoch, n)
    return list(perm[step * b : (step + 1) * b])


def iteration_position(i: int, n: int, b: int) -> tuple[int, int]:
    """(epoch, step) of 1-based iteration i."""
    spe = steps_per_epoch(n, b)
    return (i - 1) // spe, (i - 1) % spe


def validate_distinct(schedule: list[list[int]]) -> bool:
    """True iff no index repeats within the given (single-epoch) batches."""
    seen: set[int] = set()
    for batch in schedule:
        for r in batch:
            if r in seen:
                return False
            seen.add(r)
    return True


@dataclass
class TaskData:
    """Training split plus whatever derived views an algorithm needs."""

    train: Dataset
    holdout: Dataset | None
    tree: TreeData | None = None


def prepare_data(spec: TaskSpec, ds: Dataset) -> TaskData:
    if ds.n == 0:
        raise ConfigError("empty dataset")
    if spec.dataset_digest and spec.dataset_digest != ds.digest:
        raise ConfigError("dataset digest does not match the task")
    h = spec.holdout
    train = ds.subset(range(ds.n - h)) if h else ds
    hold = ds.subset(range(ds.n - h, ds.n)) if h else None
    tree = None
    if spec.kind == "tree":
        hs = bucketize(train, spec.cfg.k_bins)
        tree = TreeData(hs.bins, list(train.labels))
    return TaskData(train, hold, tree)


def batch(spec: TaskSpec, data: TaskData, i: int) -> tuple[list[list[int]], list[int]]:
    if spec.kind == "tree":
        return [], []
    n, b = data.train.n, spec.cfg.batch_size
    e, s = iteration_position(i, n, b)
    rows = batch_indices(spec.batch_seed, e, s, b, n)
    return [data.train.features[r] for r in rows], [data.train.labels[r] for r in rows]
