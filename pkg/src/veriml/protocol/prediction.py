"""Verifiable prediction service and delivery attestation for linear models.

The prediction circuit takes the model and the predictions as witnesses and
publishes only two digests: the model hash (offset-binary packing of the
parameters) and a salted commitment to the predictions.  The client checks
the proof without learning the predictions, pays through the hash-locked
escrow, and then decrypts and checks them against the commitment.
"""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from ..backend import get_backend
from ..gadgets.core import compare_leq, split, truncation_check
from ..gadgets.sha256 import bind_digest, digest_words, sha256_digest
from ..models.base import ModelState
from ..models.linear import dot
from ..payment import Ledger, decrypt_delivery, encrypt_delivery, lock, post_escrow, redeem
from ..prng import PinnedPRNG
from ..r1cs import Circuit, FieldConfig, as_lc, default_field, lc_sum

MODEL_OFFSET = 1 << 63
LINEAR_KINDS = ("linreg", "logreg", "svm")


def pack_model(params: Sequence[int]) -> bytes:
    """Each parameter as 8 little-endian bytes of params + 2^63."""
    out = []
    for v in params:
        if not -MODEL_OFFSET <= v < MODEL_OFFSET:
            raise ValueError("parameter does not fit the 64-bit packing")
        out.append((v + MODEL_OFFSET).to_bytes(8, "little"))
    return b"".join(out)


def model_hash(params: Sequence[int]) -> bytes:
    return hashlib.sha256(pack_model(params)).digest()


def result_coefficients(seed: int, n: int, p: int) -> list[int]:
    rng = PinnedPRNG(seed, "pred-coeff")
    return [rng.randbelow(p) for _ in range(n)]


def result_commitment(results: Sequence[int], salt: int, u: Sequence[int], p: int) -> bytes:
    rc = sum(a * b for a, b in zip(results, u)) % p
    return hashlib.sha256(rc.to_bytes(32, "little") + salt.to_bytes(32, "little")).digest()


def native_predictions(kind: str, params, X, l: int) -> list[int]:
    if kind == "linreg":
        return [dot(x, params) >> l for x in X]
    return [1 if dot(x, params) >= 0 else 0 for x in X]


def _check_width(c: Circuit) -> None:
    if c.p.bit_length() < 254:
        raise ValueError(f"model hashing needs a field of at least 254 bits, got {c.p.bit_length()}")


def _model_digest_gadget(c: Circuit, w) -> list:
    bits = []
    for x in w:
        bits += split(c, as_lc(x) + MODEL_OFFSET, 64)
    return sha256_digest(c, bits)


class PredictionCircuit:
    def __init__(self, kind: str, d: int, n: int, l: int, field_cfg: FieldConfig | None = None,
                 coeff_seed: int = 0, int_budget: int = 16):
        if kind not in LINEAR_KINDS:
            raise ValueError(f"prediction circuits cover {LINEAR_KINDS}, not {kind!r}")
        self.kind, self.d, self.n, self.l = kind, d, n, l
        c = Circuit(field_cfg or default_field(), f"{kind}-predict")
        _check_width(c)
        self.u = result_coefficients(coeff_seed, n, c.p)
        X = c.public_input("X", n * d)
        mh = c.public_output("model_hash", 8)
        rh = c.public_output("result_hash", 8)
        w = c.witness_input("w", d)
        r = c.witness_input("results", n)
        salt = c.witness_input("salt")
        bind_digest(c, _model_digest_gadget(c, w), mh)
        bits = 2 * (int_budget + l) + d.bit_length() + 2
        for j in range(n):
            score = lc_sum(c.mul(X[j * d + t], w[t]) for t in range(d))
            if kind == "linreg":
                truncation_check(c, score, r[j], l)
            else:
                c.enforce(r[j] - compare_leq(c, 0, score, bits), 1, 0)
        rc = lc_sum(rj * uj for rj, uj in zip(r, self.u))
        pad = [0, 0]
        bind_digest(c, sha256_digest(c, split(c, rc, 254) + pad + split(c, salt, 254) + pad), rh)
        self.circuit = c.freeze()

    def solve(self, params, X, results, salt: int):
        flatX = [v for row in X for v in row]
        return self.circuit.solve({"X": flatX, "w": list(params), "results": list(results), "salt": salt})

    def public_io(self, X, mhash: bytes, rhash: bytes) -> dict:
        return {"X": [v for row in X for v in row], "model_hash": digest_words(mhash),
                "result_hash": digest_words(rhash)}


@dataclass
class PredictionTranscript:
    accepted: bool
    reason: str
    model_hash: bytes
    result_hash: bytes
    ciphertext: bytes = b""
    results: list[int] | None = None
    ledger: Ledger | None = None
    events: list[str] = field(default_factory=list)


def prediction_protocol(state: ModelState, X, ek=None, vk=None, *, kind: str | None = None,
                        expected_model_hash: bytes | None = None, coeff_seed: int = 0,
                        field_cfg: FieldConfig | None = None, ledger: Ledger | None = None,
                        fee: int = 1, timeout: int = 10, server_rng: bytes | None = None,
                        backend: str = "transparent") -> PredictionTranscript:
    """Server predicts on ``X`` and proves it; the client pays only after the proof verifies."""
    kind = kind or state.kind
    l = state.frac_bits
    pc = PredictionCircuit(kind, len(state.params), len(X), l, field_cfg, coeff_seed)
    be = get_backend(backend)
    if ek is None or vk is None:
        ek, vk = be.keygen(pc.circuit)
    # server side
    rnd = server_rng if server_rng is not None else os.urandom(64)
    salt = int.from_bytes(hashlib.sha256(b"salt" + rnd).digest(), "little") >> 2
    key = hashlib.sha256(b"key" + rnd).digest()
    results = native_predictions(kind, state.params, X, l)
    z = pc.solve(state.params, X, results, salt)
    proof = be.prove(ek, {"X": [v for row in X for v in row]}, z)
    mh = model_hash(state.params)
    rh = result_commitment(results, salt, pc.u, pc.circuit.p)
    payload = json.dumps({"results": results, "salt": str(salt)}).encode()
    ct = encrypt_delivery(key, payload)
    tr = PredictionTranscript(False, "", mh, rh, ct, events=["prove"])
    # client side
    if expected_model_hash is not None and expected_model_hash != mh:
        tr.reason = "model-hash-mismatch"
        return tr
    if not be.verify(vk, pc.public_io(X, mh, rh), proof):
        tr.reason = "proof-invalid"
        return tr
    tr.events.append("verify")
    ledger = ledger if ledger is not None else Ledger({"client": fee, "server": 0})
    tx = post_escrow(ledger, "client", lock(key), fee, ledger.clock + timeout)
    tr.events.append("escrow")
    if not redeem(ledger, tx, key):
        tr.reason = "redeem-failed"
        return tr
    tr.events.append("redeem")
    opened = json.loads(decrypt_delivery(ledger.txs[tx.txid].preimage, ct))
    got, got_salt = [int(v) for v in opened["results"]], int(opened["salt"])
    if result_commitment(got, got_salt, pc.u, pc.circuit.p) != rh:
        tr.reason = "result-commitment-mismatch"
        return tr
    tr.accepted, tr.results, tr.ledger = True, got, ledger
    return tr


class AttestationCircuit:
    """Accuracy of a linear classifier on a public test set, bound to the model hash."""

    def __init__(self, d: int, n: int, l: int, field_cfg: FieldConfig | None = None, int_budget: int = 16):
        self.d, self.n, self.l = d, n, l
        c = Circuit(field_cfg or default_field(), "delivery-attestation")
        _check_width(c)
        X = c.public_input("X", n * d)
        Y = c.public_input("Y", n)
        num = c.public_input("claim_num")
        den = c.public_input("claim_den")
        mh = c.public_output("model_hash", 8)
        w = c.witness_input("w", d)
        bind_digest(c, _model_digest_gadget(c, w), mh)
        bits = 2 * (int_budget + l) + d.bit_length() + 2
        correct = []
        for j in range(n):
            score = lc_sum(c.mul(X[j * d + t], w[t]) for t in range(d))
            pred = compare_leq(c, 0, score, bits)
            # 1 - xor(pred, y)
            correct.append(1 - pred - Y[j] + c.mul(pred, Y[j]) * 2)
        # claimed accuracy num/den <= correct/n; den < 2^32 keeps this in range
        split(c, c.mul(lc_sum(correct), den) - num * n, n.bit_length() + 34)
        self.circuit = c.freeze()

    def inputs(self, params, X, Y, claim: Fraction) -> dict:
        return {"X": [v for row in X for v in row], "Y": list(Y), "claim_num": claim.numerator,
                "claim_den": claim.denominator, "w": list(params)}


def delivery_accuracy_attestation(state: ModelState, X, Y, claimed_accuracy, ek=None, vk=None, *,
                                  declared_hash: bytes | None = None, field_cfg: FieldConfig | None = None,
                                  backend: str = "transparent") -> bool:
    """True iff the server can prove accuracy >= claim for the model whose hash was declared."""
    claim = Fraction(claimed_accuracy).limit_denominator(1 << 31)
    if not 0 <= claim <= 1:
        raise ValueError("claimed accuracy must lie in [0, 1]")
    ac = AttestationCircuit(len(state.params), len(X), state.frac_bits, field_cfg)
    be = get_backend(backend)
    if ek is None or vk is None:
        ek, vk = be.keygen(ac.circuit)
    inp = ac.inputs(state.params, X, Y, claim)
    z = ac.circuit.solve(inp)
    pub = {k: inp[k] for k in ("X", "Y", "claim_num", "claim_den")}
    try:
        proof = be.prove(ek, pub, z)
    except ValueError:
        return False
    mh = model_hash(state.params)
    if declared_hash is not None and declared_hash != mh:
        return False
    return be.verify(vk, {**pub, "model_hash": digest_words(mh)}, proof)
