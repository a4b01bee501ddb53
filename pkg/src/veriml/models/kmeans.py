"""Mini-batch K-means with per-cluster running means.

State is the k x d centroid matrix followed by k per-cluster counts (both at
scale 2^l; counts start at 1, so the initial centroid acts as one sample).
A batch assigns each point to its nearest centroid (ties to the lowest index)
and then replaces each centroid by the running mean over everything it has
absorbed.  Clusters with no points in the batch keep their centroid.
"""

from __future__ import annotations

from fractions import Fraction

from ..prng import PinnedPRNG
from .base import Algorithm, ModelState, StepResult


def sqdist(x, cen) -> int:
    return sum((a - b) * (a - b) for a, b in zip(x, cen))


class KMeans(Algorithm):
    kind = "kmeans"

    @property
    def k(self) -> int:
        return self.cfg.k_clusters

    def param_count(self) -> int:
        return self.k * self.dims["d"] + self.k

    def centroids(self, state: ModelState) -> list[list[int]]:
        d = self.dims["d"]
        return [state.params[r * d : (r + 1) * d] for r in range(self.k)]

    def counts(self, state: ModelState) -> list[int]:
        return state.params[self.k * self.dims["d"] :]

    def init_state(self, seed: int, data=None) -> ModelState:
        if data is None:
            raise ValueError("K-means initialisation samples centroids from the data")
        rows = self.init_rows(seed, data.features)
        params = [v for r in rows for v in data.features[r]] + [1 << self.l] * self.k
        return ModelState(self.kind, params, self.l, 0, {"k": self.k, "d": self.dims["d"]})

    def init_rows(self, seed: int, X) -> list[int]:
        """Seeded start; "farthest" then adds the point farthest from those chosen (lowest index on ties)."""
        rng = PinnedPRNG(seed, "kmeans-init")
        if self.cfg.kmeans_init == "random":
            return rng.sample(len(X), self.k)
        rows = [rng.randbelow(len(X))]
        near = [sqdist(x, X[rows[0]]) for x in X]
        while len(rows) < self.k:
            far = max(range(len(X)), key=lambda r: (near[r], -r))
            rows.append(far)
            near = [min(a, sqdist(x, X[far])) for a, x in zip(near, X)]
        return rows

    def assign(self, cents, x) -> tuple[int, list[int]]:
        dists = [sqdist(x, c) for c in cents]
        return min(range(len(dists)), key=lambda j: (dists[j], j)), dists

    def step(self, state: ModelState, X, Y, i: int, data=None) -> StepResult:
        l = self.l
        d = self.dims["d"]
        cents = self.centroids(state)
        counts = self.counts(state)
        cnt = [0] * self.k
        sums = [[0] * d for _ in range(self.k)]
        for x in X:
            j, _ = self.assign(cents, x)
            cnt[j] += 1
            for t in range(d):
                sums[j][t] += x[t]
        new_c, new_n = [], []
        for j in range(self.k):
            n_new = counts[j] + (cnt[j] << l)
            new_c.extend((counts[j] * cv + (sv << l)) // n_new for cv, sv in zip(cents[j], sums[j]))
            new_n.append(n_new)
        params = new_c + new_n
        return StepResult(ModelState(self.kind, params, l, i, state.shape), [p << 3 * l for p in params])

    def predict(self, state: ModelState, x) -> int:
        return self.assign(self.centroids(state), x)[0]

    def metric(self, state: ModelState, X, Y) -> Fraction:
        cents = self.centroids(state)
        tot = sum(min(sqdist(x, c) for c in cents) for x in X)
        return Fraction(tot, len(X) << (2 * self.l))
