"""Linear and logistic regression trained by mini-batch SGD in fixed point."""

from __future__ import annotations

from fractions import Fraction
from typing import Sequence

from ..approx import sigmoid_raw
from ..fixedpoint import encode_raw
from ..prng import PinnedPRNG
from .base import Algorithm, ModelState, StepResult


def random_params(seed: int, n: int, scale: Fraction, l: int, domain: str = "init") -> list[int]:
    bound = encode_raw(scale, l)
    rng = PinnedPRNG(seed, domain)
    return [rng.randrange(-bound, bound + 1) for _ in range(n)]


def dot(x: Sequence[int], w: Sequence[int]) -> int:
    return sum(a * b for a, b in zip(x, w))


class LinReg(Algorithm):
    kind = "linreg"

    def param_count(self) -> int:
        return self.dims["d"]

    def init_state(self, seed: int, data=None) -> ModelState:
        p = random_params(seed, self.param_count(), Fraction(self.cfg.init_scale), self.l)
        return ModelState(self.kind, p, self.l, 0, {"d": self.dims["d"]})

    def step(self, state: ModelState, X, Y, i: int, data=None, c: int | None = None) -> StepResult:
        l = self.l
        c = self.cfg.alpha_over_b(i) if c is None else c
        w = state.params
        res = [dot(x, w) - (y << l) for x, y in zip(X, Y)]
        full, new = [], []
        sh = 3 * l
        for j, wj in enumerate(w):
            g = sum(r * x[j] for r, x in zip(res, X))
            f = (wj << sh) - c * g
            full.append(f)
            new.append(f >> sh)
        return StepResult(ModelState(self.kind, new, l, i, state.shape), full)

    def predict(self, state: ModelState, x) -> int:
        return dot(x, state.params) >> self.l

    def metric(self, state: ModelState, X, Y) -> Fraction:
        l = self.l
        tot = sum((dot(x, state.params) - (y << l)) ** 2 for x, y in zip(X, Y))
        return Fraction(tot, len(X) << (4 * l))

    def mse_raw(self, state: ModelState, X, Y) -> int:
        """Batch MSE at scale 2^l with the circuit's shift (b a power of two)."""
        l = self.l
        b = len(X)
        tot = sum((dot(x, state.params) - (y << l)) ** 2 for x, y in zip(X, Y))
        return tot >> (3 * l + b.bit_length() - 1)


class LogReg(Algorithm):
    kind = "logreg"

    def param_count(self) -> int:
        return self.dims["d"]

    def init_state(self, seed: int, data=None) -> ModelState:
        p = random_params(seed, self.param_count(), Fraction(self.cfg.init_scale), self.l)
        return ModelState(self.kind, p, self.l, 0, {"d": self.dims["d"]})

    def probs(self, w, X) -> list[int]:
        l = self.l
        return [sigmoid_raw(dot(x, w) >> l, l, self.cfg.sigmoid) for x in X]

    def step(self, state: ModelState, X, Y, i: int, data=None, c: int | None = None) -> StepResult:
        l = self.l
        c = self.cfg.alpha_over_b(i) if c is None else c
        w = state.params
        err = [s - (y << l) for s, y in zip(self.probs(w, X), Y)]
        full, new = [], []
        for j, wj in enumerate(w):
            g = sum(e * x[j] for e, x in zip(err, X))
            f = (wj << 2 * l) - c * g
            full.append(f << l)
            new.append(f >> 2 * l)
        return StepResult(ModelState(self.kind, new, l, i, state.shape), full)

    def predict(self, state: ModelState, x) -> int:
        return 1 if dot(x, state.params) >= 0 else 0

    def metric(self, state: ModelState, X, Y) -> Fraction:
        wrong = sum(1 for x, y in zip(X, Y) if self.predict(state, x) != y)
        return Fraction(wrong, len(X))
