"""Client role: sample challenges after the commitment, check responses and proofs."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable

from ..backend import DigestMismatch, LayoutMismatch, Proof, VerifKey, get_backend
from ..commitment import Commitment, nonce
from ..dataio import Dataset
from .circuits import iteration_circuit
from .sampling import Challenge, client_sample_challenges
from .server import ProofResponse, initial_identifier, keypair
from .task import TaskData, TaskSpec, batch, prepare_data

COMMITMENT_MISMATCH = "commitment-mismatch"
PROOF_INVALID = "proof-invalid"
MALFORMED = "malformed"


@dataclass(frozen=True)
class Verdict:
    accept: bool
    index: int | None = None
    reason: str = ""
    detail: str = ""

    def __bool__(self) -> bool:
        return self.accept

    def to_json(self) -> dict:
        return {"accept": self.accept, "index": self.index, "reason": self.reason, "detail": self.detail}


ACCEPT = Verdict(True)


def reject(i, reason, detail="") -> Verdict:
    return Verdict(False, i, reason, detail)


@dataclass
class Transcript:
    commitment: Commitment
    challenge: Challenge | None = None
    responses: list[ProofResponse] = field(default_factory=list)
    verdict: Verdict | None = None
    events: list[str] = field(default_factory=list)  # message order, e.g. commit before challenge

    def record(self, event: str) -> None:
        self.events.append(event)

    def committed_before_challenge(self) -> bool:
        return "commit" in self.events and "challenge" in self.events and \
            self.events.index("commit") < self.events.index("challenge")

    def to_json(self, proof_refs: dict[int, str] | None = None) -> dict:
        refs = proof_refs or {}
        return {
            "task_id": self.commitment.task_id,
            "N": self.commitment.N,
            "events": self.events,
            "challenge": self.challenge.to_json() if self.challenge else None,
            "responses": [
                {"i": r.i, "id_prev": r.id_prev.hex(), "id_cur": r.id_cur.hex(), "P_prev": str(r.P_prev),
                 "authentic": r.authentic, "proof": refs.get(r.i, "")}
                for r in self.responses
            ],
            "verdict": self.verdict.to_json() if self.verdict is not None else None,
        }

    def dumps(self, proof_refs=None) -> str:
        return json.dumps(self.to_json(proof_refs), indent=1)


def challenge(transcript: Transcript, c: int, client_randomness: int) -> Challenge:
    """Draw challenges; refuses unless the commitment was received first."""
    if "commit" not in transcript.events:
        raise RuntimeError("challenges must be drawn after the commitment arrives")
    ch = client_sample_challenges(transcript.commitment.N, min(c, transcript.commitment.N), client_randomness)
    transcript.challenge = ch
    transcript.record("challenge")
    return ch


def expected_identifiers(spec: TaskSpec, com: Commitment, i: int, i0: bytes) -> tuple[bytes, bytes]:
    k = spec.algorithm().prev(i)
    return (com[k] if k >= 1 else i0), com[i]


def client_verify(transcript: Transcript, spec: TaskSpec, dataset: Dataset | TaskData,
                  vk: VerifKey | None = None, backend: str = "transparent",
                  request_proof: Callable[[int], Proof] | None = None) -> Verdict:
    """Accept, or Reject with the failing index and cause.

    Responses may arrive without proofs; they are fetched through
    ``request_proof`` only once every identifier pair has matched.
    """
    v = _verify(transcript, spec, dataset, vk, backend, request_proof)
    transcript.verdict = v
    transcript.record("verdict")
    return v


def _verify(transcript, spec, dataset, vk, backend, request_proof) -> Verdict:
    com, ch = transcript.commitment, transcript.challenge
    if ch is None:
        return reject(None, MALFORMED, "no challenge")
    if com.task_id != spec.digest():
        return reject(None, MALFORMED, "commitment is for a different task")
    if not transcript.committed_before_challenge():
        return reject(None, MALFORMED, "challenge drawn before the commitment")
    got = [r.i for r in transcript.responses]
    if sorted(got) != list(ch.indices) or len(set(got)) != len(got):
        return reject(None, MALFORMED, "responses do not match the challenge")
    data = dataset if isinstance(dataset, TaskData) else prepare_data(spec, dataset)
    i0 = initial_identifier(spec, data)
    resp = sorted(transcript.responses, key=lambda r: r.i)
    # cheap comparisons first: a mismatch needs no proof checking
    for r in resp:
        if not 1 <= r.i <= com.N:
            return reject(r.i, MALFORMED, "index out of range")
        exp_prev, exp_cur = expected_identifiers(spec, com, r.i, i0)
        if r.id_prev != exp_prev:
            return reject(r.i, COMMITMENT_MISMATCH, "previous identifier differs from the commitment")
        if r.id_cur != exp_cur:
            return reject(r.i, COMMITMENT_MISMATCH, "identifier differs from the commitment")
    if vk is None:
        _, vk = keypair(spec, ch.freivald_seed, backend)
    be = get_backend(backend)
    ic = iteration_circuit(spec, ch.freivald_seed)
    k_of = spec.algorithm().prev
    for r in resp:
        if r.proof is None:
            if request_proof is None:
                return reject(r.i, MALFORMED, "missing proof")
            r.proof = request_proof(r.i)
        exp_prev, exp_cur = expected_identifiers(spec, com, r.i, i0)
        X, Y = batch(spec, data, r.i)
        io = ic.public_io(r.i, nonce(spec.batch_seed, k_of(r.i)), nonce(spec.batch_seed, r.i),
                          exp_prev, exp_cur, X, Y, data.tree)
        try:
            ok = be.verify(vk, io, r.proof)
        except (DigestMismatch, LayoutMismatch, ValueError) as e:
            return reject(r.i, PROOF_INVALID, str(e))
        if not ok:
            return reject(r.i, PROOF_INVALID, "constraints not satisfied")
    return ACCEPT


def load_proof(data: bytes, spec: TaskSpec) -> Proof:
    return Proof.from_bytes(data, spec.p)
