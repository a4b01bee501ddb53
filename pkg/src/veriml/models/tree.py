"""Histogram-based CART on a perfect binary tree.

Features are pre-bucketed into ``k_bins`` bins.  A node histogram counts
samples per (class, feature, bin), flattened in that order, with counts
stored as fixed point.  Iteration ``i`` handles heap node ``i`` (nodes
``1 .. 2^D - 1``): it picks the split maximising the Gini score
``sum_c nL_c^2 / nL + sum_c nR_c^2 / nR`` (equivalently the largest impurity
decrease) and outputs the two child histograms.  Pure nodes and nodes without
a valid split become leaves whose children are ``(parent, zeros)``, which
pads the tree to its perfect shape with dummy nodes.

Node ``i`` reads half ``i % 2`` of the state produced by iteration ``i // 2``;
the initial state is ``(zeros, root histogram)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from .base import Algorithm, ModelState, StepResult


@dataclass
class TreeData:
    bins: list[list[int]]
    labels: list[int]


@dataclass(frozen=True)
class Decision:
    leaf: bool
    feature: int = -1
    threshold: int = -1  # left branch takes bins <= threshold


class Tree(Algorithm):
    kind = "tree"
    uses_batches = False

    @property
    def kappa(self) -> int:
        return self.cfg.n_classes

    @property
    def k_bins(self) -> int:
        return self.cfg.k_bins

    @property
    def d(self) -> int:
        return self.dims["d"]

    @property
    def hist_len(self) -> int:
        return self.kappa * self.d * self.k_bins

    @property
    def n_nodes(self) -> int:
        return (1 << self.cfg.max_depth) - 1

    def param_count(self) -> int:
        return 2 * self.hist_len

    def prev(self, i: int) -> int:
        return i // 2

    def idx(self, c: int, f: int, b: int) -> int:
        return (c * self.d + f) * self.k_bins + b

    def histogram(self, data: TreeData, rows) -> list[int]:
        h = [0] * self.hist_len
        one = 1 << self.l
        for r in rows:
            c = data.labels[r]
            for f, b in enumerate(data.bins[r]):
                h[self.idx(c, f, b)] += one
        return h

    def init_state(self, seed: int, data: TreeData | None = None) -> ModelState:
        if data is None or not data.labels:
            raise ValueError("tree needs a non-empty dataset")
        root = self.histogram(data, range(len(data.labels)))
        return ModelState(self.kind, [0] * self.hist_len + root, self.l, 0, self.shape())

    def shape(self) -> dict:
        return {"classes": self.kappa, "d": self.d, "bins": self.k_bins, "depth": self.cfg.max_depth}

    def half(self, state: ModelState, i: int) -> list[int]:
        h = self.hist_len
        return state.params[(i % 2) * h : (i % 2 + 1) * h]

    # -- split search -------------------------------------------------------
    def class_totals(self, H) -> list[int]:
        return [sum(H[self.idx(c, 0, b)] for b in range(self.k_bins)) for c in range(self.kappa)]

    def candidates(self, H):
        """(nL_c, nR_c) for every candidate j = f * (k_bins - 1) + t."""
        totals = self.class_totals(H)
        out = []
        for f in range(self.d):
            for t in range(self.k_bins - 1):
                nl = [sum(H[self.idx(c, f, b)] for b in range(t + 1)) for c in range(self.kappa)]
                out.append((nl, [tc - a for tc, a in zip(totals, nl)]))
        return out

    @staticmethod
    def gini_terms(nl, nr) -> tuple[int, int]:
        """Score as num/den: (A*nR + B*nL) / (nL*nR) with A, B sums of squared class counts."""
        L, R = sum(nl), sum(nr)
        A = sum(v * v for v in nl)
        B = sum(v * v for v in nr)
        return A * R + B * L, L * R

    @staticmethod
    def is_pure(totals) -> bool:
        return sum(1 for t in totals if t) <= 1

    def decide(self, H) -> Decision:
        if self.is_pure(self.class_totals(H)):
            return Decision(True)
        cands = self.candidates(H)
        best, best_nd = -1, (0, 0)
        for j, (nl, nr) in enumerate(cands):
            if self.cfg.criterion == "entropy":
                num, den = self._entropy_score(nl, nr)
            else:
                num, den = self.gini_terms(nl, nr)
            if den == 0:
                continue
            if best < 0 or num * best_nd[1] > best_nd[0] * den:
                best, best_nd = j, (num, den)
        if best < 0:
            return Decision(True)
        return Decision(False, best // (self.k_bins - 1), best % (self.k_bins - 1))

    def _entropy_score(self, nl, nr):
        # native only: negated weighted child entropy as a rational approximation
        L, R = sum(nl), sum(nr)
        if L == 0 or R == 0:
            return 0, 0

        def ent(v, n):
            return -sum((x / n) * math.log2(x / n) for x in v if x)

        score = Fraction(-(L * ent(nl, L) + R * ent(nr, R)) / (L + R)).limit_denominator(1 << 40)
        return score.numerator, score.denominator

    def route(self, i: int, data: TreeData) -> list[int]:
        """Rows of the dataset that reach node ``i``."""
        if i == 1:
            return list(range(len(data.labels)))
        parent = self.route(i // 2, data)
        dec = self.decide(self.histogram(data, parent))
        if dec.leaf:
            return parent if i % 2 == 0 else []
        go_left = i % 2 == 0
        return [r for r in parent if (data.bins[r][dec.feature] <= dec.threshold) == go_left]

    def step(self, state: ModelState, X, Y, i: int, data: TreeData | None = None) -> StepResult:
        H = self.half(state, i)
        dec = self.decide(H)
        if dec.leaf:
            params = list(H) + [0] * self.hist_len
        else:
            rows = self.route(i, data)
            left = [r for r in rows if data.bins[r][dec.feature] <= dec.threshold]
            right = [r for r in rows if data.bins[r][dec.feature] > dec.threshold]
            params = self.histogram(data, left) + self.histogram(data, right)
        l = self.l
        return StepResult(ModelState(self.kind, params, l, i, self.shape()), [p << 3 * l for p in params])

    # -- the delivered model --------------------------------------------------
    def final_model(self, states: dict[int, ModelState]) -> ModelState:
        """Concatenate node inputs 1..2^D-1 and the last level's child histograms."""
        params = []
        for i in range(1, self.n_nodes + 1):
            params += self.half(states[self.prev(i)], i)
        for i in range(self.n_nodes // 2 + 1, self.n_nodes + 1):
            params += states[i].params
        return ModelState(self.kind, params, self.l, self.n_nodes, dict(self.shape(), model="tree"))

    def node_hist(self, model: ModelState, node: int) -> list[int]:
        h = self.hist_len
        return model.params[(node - 1) * h : node * h]

    def majority(self, H) -> int:
        totals = self.class_totals(H)
        return max(range(len(totals)), key=lambda c: (totals[c], -c))

    def predict(self, model: ModelState, x) -> int:
        node = 1
        while node <= self.n_nodes:
            H = self.node_hist(model, node)
            dec = self.decide(H)
            if dec.leaf:
                return self.majority(H)
            node = 2 * node + (0 if x[dec.feature] <= dec.threshold else 1)
        return self.majority(self.node_hist(model, node))

    def metric(self, state: ModelState, X, Y) -> Fraction:
        wrong = sum(1 for x, y in zip(X, Y) if self.predict(state, x) != y)
        return Fraction(wrong, len(X))
