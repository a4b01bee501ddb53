"""Mini-batch Pegasos for a linear SVM.

Per step ``t``: ``eta = 1/(lambda t)``; samples with margin ``y<w,x> < 1``
contribute to the sub-gradient; the half step is followed by projection onto
the ball of radius ``1/sqrt(lambda)``.  Division and square root results are
what the circuit receives as witnesses.
"""

from __future__ import annotations

from fractions import Fraction
from math import isqrt

from ..fixedpoint import encode_raw, round_half_away
from .base import Algorithm, ModelState, StepResult
from .linear import dot


class SVM(Algorithm):
    kind = "svm"

    def param_count(self) -> int:
        return self.dims["d"]

    @property
    def lam_raw(self) -> int:
        return encode_raw(Fraction(self.cfg.lam), self.l)

    @property
    def inv_b(self) -> int:
        return round_half_away(Fraction(1 << self.l, self.cfg.batch_size))

    def init_state(self, seed: int, data=None) -> ModelState:
        return ModelState(self.kind, [0] * self.param_count(), self.l, 0, {"d": self.dims["d"]})

    def trace(self, w, X, Y, t: int) -> dict:
        """All intermediate values of one step (shared with the witness generator)."""
        if t < 1:
            raise ValueError("Pegasos iteration t must be >= 1")
        l = self.l
        lam = self.lam_raw
        eta = (1 << 2 * l) // (lam * t)
        ys = [1 if y else -1 for y in Y]
        flags = [1 if ys[i] * dot(x, w) < (1 << 2 * l) else 0 for i, x in enumerate(X)]
        S = [sum(f * y * x[j] for f, y, x in zip(flags, ys, X)) for j in range(len(w))]
        half_full = [((1 << 2 * l) - eta * lam) * wj + eta * Sj * self.inv_b for wj, Sj in zip(w, S)]
        half = [h >> 2 * l for h in half_full]
        norm2 = sum(h * h for h in half)
        ln = lam * norm2
        proj = 1 if ln > (1 << 3 * l) else 0
        q = ln >> l
        s = isqrt(q)
        divisor = s if proj else (1 << l)
        phi = (1 << 2 * l) // divisor
        out_full = [phi * h for h in half]
        return dict(eta=eta, ys=ys, flags=flags, S=S, half_full=half_full, half=half, norm2=norm2,
                    proj=proj, q=q, s=s, divisor=divisor, phi=phi, out_full=out_full)

    def step(self, state: ModelState, X, Y, i: int, data=None) -> StepResult:
        tr = self.trace(state.params, X, Y, i)
        l = self.l
        new = [f >> l for f in tr["out_full"]]
        full = [f << 2 * l for f in tr["out_full"]]
        return StepResult(ModelState(self.kind, new, l, i, state.shape), full)

    def predict(self, state: ModelState, x) -> int:
        return 1 if dot(x, state.params) >= 0 else 0

    def metric(self, state: ModelState, X, Y) -> Fraction:
        wrong = sum(1 for x, y in zip(X, Y) if self.predict(state, x) != y)
        return Fraction(wrong, len(X))
