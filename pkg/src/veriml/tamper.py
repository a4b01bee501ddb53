"""Fault-injection servers for the CLI harness and the test suite.

Each mode cheats on a chosen set of iterations ``F`` and otherwise behaves
like the honest server, answering challenges as a cheater would: it reports
whatever identifier claims it can actually back and proves the computation it
really did.

skip               w_i := w_{i-1} for i in F (the work is never done)
forge-identifiers  I_i replaced by random bytes for i in F
wrong-prev         challenged i in F answered from a random input state
zero-state         for i in F the step runs on the all-zero state instead of w_{i-1}
                   (k-means keeps its cluster counts)
reorder            for i in F the step uses the batch of another iteration
"""

from __future__ import annotations

from .commitment import Commitment, exact_full, gen_coefficients, identifier_from_preimage, nonce, preimage
from .dataio import Dataset
from .models.base import ModelState
from .prng import PinnedPRNG
from .protocol.server import ProofResponse, model_digest, prove_from_state
from .protocol.task import TaskSpec, batch, prepare_data, steps_per_epoch

MODES = ("skip", "forge-identifiers", "wrong-prev", "zero-state", "reorder")


def forged_set(N: int, t_frac, seed: int) -> set[int]:
    """N - floor(t N) iterations chosen uniformly."""
    from .protocol.sampling import genuine_count

    k = N - genuine_count(N, t_frac)
    return {i + 1 for i in PinnedPRNG(seed, "forge-identifiers").sample(N, k)}


class TamperingServer:
    def __init__(self, spec: TaskSpec, dataset: Dataset, mode: str, forged: set[int],
                 seed: int = 0, backend: str = "transparent"):
        if mode not in MODES:
            raise ValueError(f"unknown tamper mode {mode!r}; expected one of {MODES}")
        if spec.kind == "tree" and mode == "reorder":
            raise ValueError("the tree has no batches to reorder")
        self.spec, self.mode, self.forged = spec, mode, set(forged)
        self.data = prepare_data(spec, dataset)
        self.backend = backend
        self.rng = PinnedPRNG(seed, "tamper")
        self.alg = spec.algorithm()
        self._train()

    def _n_iter(self) -> int:
        if self.spec.kind == "tree":
            return self.alg.n_nodes
        return self.spec.cfg.max_epochs * steps_per_epoch(self.data.train.n, self.spec.cfg.batch_size)

    def _zero(self, like: ModelState) -> ModelState:
        params = [0] * len(like.params)
        if like.kind == "kmeans":
            # counts stay: a cluster of zero mass has no running mean to update
            nc = self.spec.cfg.k_clusters * self.spec.dims["d"]
            params[nc:] = like.params[nc:]
        return ModelState(like.kind, params, like.frac_bits, like.iteration, like.shape)

    def _train(self) -> None:
        spec, alg, l, p = self.spec, self.alg, self.spec.cfg.l, self.spec.p
        d = self.data.tree if spec.kind == "tree" else self.data.train
        s0 = alg.init_state(spec.cfg.seed, d)
        self.v = gen_coefficients(spec.client_seed, len(s0.params), l, spec.cfg.int_budget)
        self.states = {0: s0}
        self.P = {0: preimage(exact_full(s0.params, l), self.v)}
        N = self._n_iter()
        ids = []
        for i in range(1, N + 1):
            prev = self.states[alg.prev(i)]
            X, Y = batch(spec, self.data, i)
            if i in self.forged and self.mode == "skip":
                st = prev.copy()
                full = exact_full(st.params, l)
            else:
                if i in self.forged and self.mode == "zero-state":
                    prev = self._zero(prev)
                if i in self.forged and self.mode == "reorder":
                    X, Y = batch(spec, self.data, i % N + 1)
                res = alg.step(prev, X, Y, i, self.data.tree)
                st, full = res.state, res.full
            self.states[i], self.P[i] = st, preimage(full, self.v)
            if i in self.forged and self.mode == "forge-identifiers":
                ids.append(self.rng.read(32))
            else:
                ids.append(identifier_from_preimage(self.P[i], nonce(spec.batch_seed, i), p, i).digest)
        final = alg.final_model(self.states) if spec.kind == "tree" else self.states[N]
        self.commitment = Commitment(spec.digest(), ids, model_digest(final), {"kind": spec.kind})

    def input_state(self, i: int) -> tuple[ModelState, int]:
        k = self.alg.prev(i)
        w = self.states[k]
        if i in self.forged and self.mode == "wrong-prev":
            bound = 1 << self.spec.cfg.l
            w = ModelState(w.kind, [self.rng.randrange(-bound, bound) for _ in w.params], w.frac_bits, k, w.shape)
            return w, preimage(exact_full(w.params, self.spec.cfg.l), self.v)
        if i in self.forged and self.mode == "zero-state":
            return self._zero(w), self.P[k]
        return w, self.P[k]

    def respond(self, i: int) -> ProofResponse:
        spec, k = self.spec, self.alg.prev(i)
        w, P = self.input_state(i)
        X, Y = batch(spec, self.data, i)
        res = self.alg.step(w, X, Y, i, self.data.tree)
        return ProofResponse(
            i,
            identifier_from_preimage(P, nonce(spec.batch_seed, k), spec.p, k).digest,
            identifier_from_preimage(preimage(res.full, self.v), nonce(spec.batch_seed, i), spec.p, i).digest,
            P,
            False,
        )

    def prove(self, i: int, freivald_seed: int = 0):
        w, P = self.input_state(i)
        # packaged without the prover's own satisfaction check: a cheater sends it anyway
        return prove_from_state(self.spec, self.data, i, w, P, None, freivald_seed, self.backend, check=False).proof
