"""Server role: train while committing, keep checkpoints, prove challenged iterations."""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path

from ..backend import EvalKey, Proof, get_backend
from ..commitment import (
    Commitment,
    exact_full,
    gen_coefficients,
    identifier_from_preimage,
    input_authenticity_check,
    nonce,
    preimage,
)
from ..dataio import Dataset
from ..models.base import ModelState
from .circuits import iteration_circuit
from .task import ConfigError, TaskData, TaskSpec, batch, prepare_data, steps_per_epoch


class MissingCheckpoint(LookupError):
    pass


@dataclass
class CheckpointStore:
    """States (and their identifier preimages) at iteration 0 and every i = 1 mod m."""

    interval: int
    states: dict[int, ModelState] = field(default_factory=dict)
    preimages: dict[int, int] = field(default_factory=dict)

    def is_checkpoint(self, i: int) -> bool:
        return i == 0 or i % self.interval == 1 % self.interval

    def put(self, i: int, state: ModelState, P: int) -> None:
        self.states[i] = state.copy()
        self.preimages[i] = P

    def payload_bits(self, l: int) -> int:
        """Parameter payload excluding the initial state, for comparison with l*d*N/m."""
        return sum(l * len(s.params) for i, s in self.states.items() if i)

    def save(self, path: str | Path) -> None:
        p = Path(path)
        p.mkdir(parents=True, exist_ok=True)
        for i, s in self.states.items():
            obj = {"i": i, "kind": s.kind, "frac_bits": s.frac_bits, "shape": s.shape,
                   "params": [str(v) for v in s.params], "P": str(self.preimages[i])}
            (p / f"ckpt_{i:08d}.json").write_text(json.dumps(obj))
        (p / "index.json").write_text(json.dumps({"interval": self.interval, "iterations": sorted(self.states)}))

    @classmethod
    def load(cls, path: str | Path) -> CheckpointStore:
        p = Path(path)
        idx = json.loads((p / "index.json").read_text())
        store = cls(int(idx["interval"]))
        for i in idx["iterations"]:
            obj = json.loads((p / f"ckpt_{i:08d}.json").read_text())
            st = ModelState(obj["kind"], [int(v) for v in obj["params"]], obj["frac_bits"], i, obj["shape"])
            store.put(i, st, int(obj["P"]))
        return store


@dataclass
class TrainResult:
    final: ModelState
    commitment: Commitment
    store: CheckpointStore
    metrics: list = field(default_factory=list)  # per-epoch convergence metric, epoch 0 = init
    all_states: dict | None = None  # only kept for the tree (its model spans every node)


def model_digest(state: ModelState) -> str:
    obj = {"kind": state.kind, "frac_bits": state.frac_bits, "shape": state.shape,
           "params": [str(v) for v in state.params]}
    return hashlib.sha256(json.dumps(obj, sort_keys=True).encode()).hexdigest()


def _init(spec: TaskSpec, data: TaskData) -> ModelState:
    alg = spec.algorithm()
    return alg.init_state(spec.cfg.seed, data.tree if spec.kind == "tree" else data.train)


def initial_identifier(spec: TaskSpec, data: TaskData) -> bytes:
    """I_0: identifier of the initial state, which both parties can derive."""
    st = _init(spec, data)
    v = gen_coefficients(spec.client_seed, len(st.params), spec.cfg.l, spec.cfg.int_budget)
    P = preimage(exact_full(st.params, spec.cfg.l), v)
    return identifier_from_preimage(P, nonce(spec.batch_seed, 0), spec.p, 0).digest


def _schedule(spec: TaskSpec, data: TaskData):
    """Yields (iteration, epoch_end) pairs; convergence may cut it short."""
    if spec.kind == "tree":
        n_nodes = spec.algorithm().n_nodes
        for i in range(1, n_nodes + 1):
            yield i, i == n_nodes
        return
    spe = steps_per_epoch(data.train.n, spec.cfg.batch_size)
    for e in range(spec.cfg.max_epochs):
        for s in range(spe):
            yield e * spe + s + 1, s == spe - 1


def server_train(spec: TaskSpec, dataset: Dataset) -> TrainResult:
    spec.check_field()
    data = prepare_data(spec, dataset)
    alg = spec.algorithm()
    cfg, l, p = spec.cfg, spec.cfg.l, spec.p
    state = _init(spec, data)
    v = gen_coefficients(spec.client_seed, len(state.params), l, cfg.int_budget)
    store = CheckpointStore(spec.interval)
    store.put(0, state, preimage(exact_full(state.params, l), v))
    states = {0: state}
    ids: list[bytes] = []
    tconv = cfg.conv_value()
    metric_set = data.holdout if data.holdout is not None else data.train
    metrics = []
    if spec.kind != "tree":
        metrics.append(alg.metric(state, metric_set.features, metric_set.labels))
    for i, epoch_end in _schedule(spec, data):
        X, Y = batch(spec, data, i)
        res = alg.step(states[alg.prev(i)], X, Y, i, data.tree)
        P = preimage(res.full, v)
        ids.append(identifier_from_preimage(P, nonce(spec.batch_seed, i), p, i).digest)
        if store.is_checkpoint(i):
            store.put(i, res.state, P)
        if spec.kind == "tree":
            states[i] = res.state
        else:
            states = {i: res.state}
        if epoch_end and spec.kind != "tree":
            metrics.append(alg.metric(res.state, metric_set.features, metric_set.labels))
            if abs(metrics[-1] - metrics[-2]) < tconv:
                break
    if not ids:
        raise ConfigError("training produced no iterations")
    N = len(ids)
    final = alg.final_model(states) if spec.kind == "tree" else states[N]
    com = Commitment(spec.digest(), ids, model_digest(final), {"kind": spec.kind})
    return TrainResult(final, com, store, metrics, states if spec.kind == "tree" else None)


def retrieve(store: CheckpointStore, i: int, spec: TaskSpec, data: TaskData) -> tuple[ModelState, int, int]:
    """(state_i, preimage P_i, native steps re-run) from the nearest checkpoint on i's chain."""
    alg = spec.algorithm()
    chain = []
    k = i
    while k not in store.states:
        if k <= 0:
            raise MissingCheckpoint(f"no checkpoint covers iteration {i}")
        chain.append(k)
        k = alg.prev(k)
    state, P = store.states[k], store.preimages[k]
    if not chain:
        return state.copy(), P, 0
    v = gen_coefficients(spec.client_seed, len(state.params), spec.cfg.l, spec.cfg.int_budget)
    for j in reversed(chain):
        X, Y = batch(spec, data, j)
        res = alg.step(state, X, Y, j, data.tree)
        state = res.state
    return state, preimage(res.full, v), len(chain)


def retrieve_state(store: CheckpointStore, i: int, spec: TaskSpec, dataset: Dataset | TaskData) -> ModelState:
    data = dataset if isinstance(dataset, TaskData) else prepare_data(spec, dataset)
    return retrieve(store, i, spec, data)[0]


@dataclass
class ProofResponse:
    i: int
    id_prev: bytes
    id_cur: bytes
    P_prev: int  # authenticity witness: the committed preimage of the input state
    authentic: bool
    proof: Proof | None = None  # requested lazily, after the identifier comparison


def server_prove_iteration(spec: TaskSpec, store: CheckpointStore, dataset: Dataset | TaskData, i: int,
                           ek: EvalKey | None = None, freivald_seed: int = 0,
                           backend: str = "transparent") -> ProofResponse:
    data = dataset if isinstance(dataset, TaskData) else prepare_data(spec, dataset)
    k = spec.algorithm().prev(i)
    w_prev, P_prev, _ = retrieve(store, k, spec, data)
    return prove_from_state(spec, data, i, w_prev, P_prev, ek, freivald_seed, backend)


def prove_from_state(spec: TaskSpec, data: TaskData, i: int, w_prev: ModelState, P_prev: int,
                     ek: EvalKey | None = None, freivald_seed: int = 0,
                     backend: str = "transparent", check: bool = True) -> ProofResponse:
    """Solve the iteration circuit on (w_prev, P_prev) and prove it.

    With ``check=False`` an unsatisfied assignment is still packaged (used by
    fault-injection harnesses to hand the verifier a bad proof).
    """
    ic = iteration_circuit(spec, freivald_seed)
    if ek is None:
        ek, _ = keypair(spec, freivald_seed, backend)
    k = spec.algorithm().prev(i)
    X, Y = batch(spec, data, i)
    pub, wit = ic.inputs(i, nonce(spec.batch_seed, k), nonce(spec.batch_seed, i), P_prev, w_prev, X, Y, data.tree)
    z = ic.circuit.solve({**pub, **wit})
    if check:
        proof = get_backend(backend).prove(ek, pub, z)
    else:
        proof = raw_proof(ek, z)
    idp, idc = ic.output_words(z)
    ok = input_authenticity_check(P_prev, w_prev.params, ic.v, spec.cfg.l, ic.D, spec.strict_authenticity)
    return ProofResponse(i, _b(idp), _b(idc), P_prev, ok, proof)


def raw_proof(ek: EvalKey, z) -> Proof:
    """Package an assignment without checking it (the transparent proof format)."""
    from ..backend import _n_prefix

    start = _n_prefix(ek.circuit)
    big = {i - start: v for i, v in z.big.items() if i >= start}
    return Proof(ek.backend_tag, ek.circuit_digest, z.small[start:].copy(), big)


def _b(words) -> bytes:
    return b"".join(int(w).to_bytes(4, "big") for w in words)


_KEYS: dict = {}


def keypair(spec: TaskSpec, freivald_seed: int = 0, backend: str = "transparent", security: int = 128):
    key = (spec.digest(), freivald_seed, backend)
    if key not in _KEYS:
        if len(_KEYS) >= 8:
            _KEYS.pop(next(iter(_KEYS)))
        _KEYS[key] = get_backend(backend).keygen(iteration_circuit(spec, freivald_seed).circuit, security)
    return _KEYS[key]


class Server:
    """Honest server: trains once, then answers challenges from its checkpoints."""

    def __init__(self, spec: TaskSpec, dataset: Dataset, backend: str = "transparent",
                 result: TrainResult | None = None):
        self.spec = spec
        self.dataset = dataset
        self.data = prepare_data(spec, dataset)
        self.backend = backend
        self.result = result if result is not None else server_train(spec, dataset)
        self.v = gen_coefficients(spec.client_seed, len(self.result.store.states[0].params),
                                  spec.cfg.l, spec.cfg.int_budget)

    @classmethod
    def from_checkpoints(cls, spec: TaskSpec, dataset: Dataset, commitment: Commitment,
                         store: CheckpointStore, backend: str = "transparent") -> Server:
        """Resume proving from saved artifacts without retraining."""
        return cls(spec, dataset, backend, TrainResult(store.states[0], commitment, store))

    @property
    def commitment(self) -> Commitment:
        return self.result.commitment

    @property
    def store(self) -> CheckpointStore:
        return self.result.store

    def input_state(self, i: int) -> tuple[ModelState, int]:
        state, P, _ = retrieve(self.store, self.spec.algorithm().prev(i), self.spec, self.data)
        return state, P

    def respond(self, i: int) -> ProofResponse:
        """Identifier claims (I'_{prev(i)}, I'_i) computed natively, without a proof."""
        spec, alg = self.spec, self.spec.algorithm()
        k = alg.prev(i)
        w_prev, P_prev = self.input_state(i)
        X, Y = batch(spec, self.data, i)
        res = alg.step(w_prev, X, Y, i, self.data.tree)
        idp = identifier_from_preimage(P_prev, nonce(spec.batch_seed, k), spec.p, k).digest
        idc = identifier_from_preimage(preimage(res.full, self.v), nonce(spec.batch_seed, i), spec.p, i).digest
        ok = input_authenticity_check(P_prev, w_prev.params, self.v, spec.cfg.l, len(self.v),
                                      spec.strict_authenticity)
        return ProofResponse(i, idp, idc, P_prev, ok)

    def prove(self, i: int, freivald_seed: int = 0) -> Proof:
        w_prev, P_prev = self.input_state(i)
        return prove_from_state(self.spec, self.data, i, w_prev, P_prev, None, freivald_seed, self.backend).proof
