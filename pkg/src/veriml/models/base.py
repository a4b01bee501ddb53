"""Shared model types: configuration, state, and the per-algorithm interface."""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from fractions import Fraction
from typing import Sequence

from ..fixedpoint import DEFAULT_FRAC_BITS, DEFAULT_INT_BUDGET, FixedPoint, encode_raw


@dataclass(frozen=True)
class TrainConfig:
    alpha: str = "0.05"  # decimal string so the encoding is exact and portable
    batch_size: int = 8
    frac_bits: int = DEFAULT_FRAC_BITS
    int_budget: int = DEFAULT_INT_BUDGET
    conv_threshold: str = "0"
    max_epochs: int = 1
    seed: int = 0
    lam: str = "0.01"
    k_clusters: int = 4
    kmeans_init: str = "farthest"  # farthest | random
    k_bins: int = 4
    max_depth: int = 3
    n_classes: int = 2
    nn_layers: tuple[int, ...] = (128, 128)
    activation: str = "square"  # NN hidden activation: square | remez
    sigmoid: str = "remez"  # logistic regression: remez | taylor | piecewise
    criterion: str = "gini"  # tree: gini | entropy (entropy is native only)
    variable_alpha: bool = False
    alpha_decay: str = "0"  # variable-alpha mode: alpha_i = alpha / (1 + decay * (i - 1))
    init_scale: str = "0.5"

    def __post_init__(self):
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.conv_value() < 0:
            raise ValueError("conv_threshold must be >= 0")
        if self.frac_bits < 1:
            raise ValueError("frac_bits must be >= 1")

    @property
    def l(self) -> int:
        return self.frac_bits

    def conv_value(self) -> Fraction | float:
        t = str(self.conv_threshold).strip().lower()
        return float("inf") if t in ("inf", "infinity") else Fraction(t)

    def alpha_over_b(self, i: int | None = None) -> int:
        """c = round((alpha / b) * 2^l), the folded learning-rate constant.

        In variable-alpha mode the rate of iteration ``i`` decays as
        ``alpha / (1 + alpha_decay * (i - 1))`` and enters the circuit as a public input.
        """
        a = Fraction(self.alpha)
        if self.variable_alpha and i is not None:
            a /= 1 + Fraction(self.alpha_decay) * (i - 1)
        return encode_raw(a / self.batch_size, self.frac_bits)

    def to_json(self) -> dict:
        d = asdict(self)
        d["nn_layers"] = list(self.nn_layers)
        return d

    @classmethod
    def from_json(cls, obj: dict) -> TrainConfig:
        obj = dict(obj)
        if "nn_layers" in obj:
            obj["nn_layers"] = tuple(obj["nn_layers"])
        for k in ("alpha", "conv_threshold", "lam", "init_scale", "alpha_decay"):
            if k in obj:
                obj[k] = str(obj[k])
        return cls(**obj)

    def with_(self, **kw) -> TrainConfig:
        return replace(self, **kw)


@dataclass
class ModelState:
    kind: str
    params: list[int]  # raw integers at scale 2^frac_bits, flattened row-major
    frac_bits: int
    iteration: int = 0
    shape: dict = field(default_factory=dict)

    def fixed(self) -> list[FixedPoint]:
        return [FixedPoint(r, self.frac_bits, 1 << 20) for r in self.params]

    def floats(self) -> list[float]:
        s = float(1 << self.frac_bits)
        return [r / s for r in self.params]

    def __len__(self) -> int:
        return len(self.params)

    def copy(self) -> ModelState:
        return ModelState(self.kind, list(self.params), self.frac_bits, self.iteration, dict(self.shape))


@dataclass
class StepResult:
    state: ModelState
    full: list[int]  # untruncated output, one entry per parameter, at scale 2^(4l)


def lift_full(params: Sequence[int], from_scale: int, l: int) -> list[int]:
    """Move raw values at 2^from_scale to the canonical identifier scale 2^(4l)."""
    sh = 4 * l - from_scale
    return [p << sh for p in params]


class Algorithm:
    """Native fixed-point learner; circuits in ``protocol.circuits`` mirror each method."""

    kind = "base"
    uses_batches = True

    def __init__(self, cfg: TrainConfig, dims: dict):
        self.cfg = cfg
        self.dims = dims
        self.l = cfg.frac_bits

    def prev(self, i: int) -> int:
        return i - 1

    def param_count(self) -> int:
        raise NotImplementedError

    def init_state(self, seed: int, data=None) -> ModelState:
        raise NotImplementedError

    def step(self, state: ModelState, X, Y, i: int, data=None) -> StepResult:
        raise NotImplementedError

    def predict(self, state: ModelState, x: Sequence[int]) -> int:
        raise NotImplementedError

    def metric(self, state: ModelState, X, Y) -> Fraction:
        """Lower is better; used by the epoch convergence rule."""
        raise NotImplementedError

    def max_abs_param_bits(self) -> int:
        return self.cfg.int_budget + self.l
