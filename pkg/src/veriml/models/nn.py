"""Fully connected network with two hidden layers, trained in fixed point.

Hidden activation is ``x^2`` or the clamped Remez cubic.  The classifier head
is the square-softmax ``p_i = z_i^2 / sum z_j^2`` with the output error
``delta = p - onehot(y)`` (the usual softmax/cross-entropy error signal with
the squared surrogate in place of the exponential).  A linear head with
squared loss is available for gradient checks.  Biases are omitted.

Every matrix product is kept at double scale and floored back to ``2^l``
before it feeds the next layer; weight gradients stay untruncated until the
update, which is floored once.
"""

from __future__ import annotations

from fractions import Fraction
from math import sqrt

from ..approx import clamp_raw, coeffs_raw, sigmoid_poly_raw
from ..fixedpoint import encode_raw
from ..prng import PinnedPRNG
from .base import Algorithm, ModelState, StepResult


def matmul(A, B):
    Bt = list(zip(*B))
    return [[sum(a * b for a, b in zip(row, col)) for col in Bt] for row in A]


def transpose(A):
    return [list(r) for r in zip(*A)]


def shift_mat(A, s: int):
    return [[v >> s for v in row] for row in A]


class NN(Algorithm):
    kind = "nn"

    @property
    def layers(self) -> tuple[int, ...]:
        return tuple(self.dims["layers"])

    @property
    def output(self) -> str:
        return self.dims.get("output", "softmax")

    def param_count(self) -> int:
        L = self.layers
        return sum(L[i] * L[i + 1] for i in range(len(L) - 1))

    def unpack(self, params):
        L = self.layers
        Ws, pos = [], 0
        for i in range(len(L) - 1):
            r, c = L[i], L[i + 1]
            Ws.append([params[pos + a * c : pos + (a + 1) * c] for a in range(r)])
            pos += r * c
        return Ws

    @staticmethod
    def pack(Ws) -> list[int]:
        return [v for W in Ws for row in W for v in row]

    def init_state(self, seed: int, data=None) -> ModelState:
        L = self.layers
        rng = PinnedPRNG(seed, "nn-init")
        scale = Fraction(self.cfg.init_scale)
        params = []
        for i in range(len(L) - 1):
            bound = encode_raw(scale * Fraction(sqrt(3.0 / L[i])), self.l)
            params += [rng.randrange(-bound, bound + 1) for _ in range(L[i] * L[i + 1])]
        return ModelState(self.kind, params, self.l, 0, {"layers": list(L), "output": self.output})

    # -- forward / backward -------------------------------------------------
    def activate(self, Z):
        """Returns (activation, derivative) at scale 2^l."""
        l = self.l
        if self.cfg.activation == "square":
            return [[(z * z) >> l for z in row] for row in Z], [[2 * z for z in row] for row in Z]
        if self.cfg.activation == "remez":
            lim = 5 << l
            a3, a1, _ = coeffs_raw("remez", l)
            A, D = [], []
            for row in Z:
                ar, dr = [], []
                for z in row:
                    zc = clamp_raw(z, l)
                    ar.append(sigmoid_poly_raw(zc, l, "remez"))
                    inside = -lim <= z <= lim
                    dr.append(((3 * a3 * zc * zc + a1 * (1 << 2 * l)) >> 2 * l) if inside else 0)
                A.append(ar)
                D.append(dr)
            return A, D
        raise ValueError(f"unknown activation {self.cfg.activation!r}")

    def softmax_sq(self, logits):
        l = self.l
        out = []
        for row in logits:
            sq = [z * z for z in row]
            S = sum(sq) or 1
            out.append([(s << l) // S for s in sq])
        return out

    def forward(self, Ws, X):
        l = self.l
        acts, derivs, zs = [X], [], []
        A = X
        for k, W in enumerate(Ws):
            Z = shift_mat(matmul(A, W), l)
            zs.append(Z)
            if k < len(Ws) - 1:
                A, D = self.activate(Z)
                acts.append(A)
                derivs.append(D)
            else:
                A = Z
        return acts, derivs, zs

    def trace(self, params, X, Y) -> dict:
        l = self.l
        Ws = self.unpack(params)
        acts, derivs, zs = self.forward(Ws, X)
        logits = zs[-1]
        if self.output == "softmax":
            P = self.softmax_sq(logits)
            delta = [[p - ((1 << l) if j == y else 0) for j, p in enumerate(row)] for row, y in zip(P, Y)]
        else:
            # linear head: Y holds raw targets at scale 2^l, loss 0.5 * sum (z - y)^2
            P = None
            delta = [[z - y for z in row] for row, y in zip(logits, Y)]
        grads = [None] * len(Ws)
        errs = []
        for k in range(len(Ws) - 1, -1, -1):
            grads[k] = matmul(transpose(acts[k]), delta)
            if k > 0:
                E = shift_mat(matmul(delta, transpose(Ws[k])), l)
                errs.append(E)
                delta = [[(e * dv) >> l for e, dv in zip(er, dr)] for er, dr in zip(E, derivs[k - 1])]
        return dict(Ws=Ws, acts=acts, derivs=derivs, zs=zs, probs=P, grads=grads)

    def gradients(self, state: ModelState, X, Y) -> list[int]:
        """Weight gradients at scale 2^(2l), flattened like the parameters."""
        return self.pack(self.trace(state.params, X, Y)["grads"])

    def step(self, state: ModelState, X, Y, i: int, data=None) -> StepResult:
        l = self.l
        c = self.cfg.alpha_over_b(i)
        g = self.gradients(state, X, Y)
        full3 = [(w << 2 * l) - c * gv for w, gv in zip(state.params, g)]
        new = [f >> 2 * l for f in full3]
        return StepResult(ModelState(self.kind, new, l, i, state.shape), [f << l for f in full3])

    def logits(self, state: ModelState, X):
        return self.forward(self.unpack(state.params), X)[2][-1]

    def predict(self, state: ModelState, x) -> int:
        row = self.logits(state, [list(x)])[0]
        if self.output != "softmax":
            return row[0]
        sq = [z * z for z in row]
        return max(range(len(sq)), key=lambda j: (sq[j], -j))

    def metric(self, state: ModelState, X, Y) -> Fraction:
        wrong = sum(1 for x, y in zip(X, Y) if self.predict(state, x) != y)
        return Fraction(wrong, len(X))
