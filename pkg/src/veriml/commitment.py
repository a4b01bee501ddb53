"""Model blinding identifiers and the commitment file.

The identifier of iteration ``i`` hashes the weighted sum ``P = sum_j v_j f_j``
of the untruncated output ``f`` (every algorithm reports it at scale
``2^(4l)``; with ``v`` at ``2^l`` the sum lives at ``2^(5l)``) together with a
254-bit nonce:

    digest = SHA-256( LE32(P mod p) || LE32(nonce_i) )

Exact states (initial weights, checkpoints without a pending step) are lifted
to the same scale, so ``P`` of an exact state is ``<w, v> * 2^(3l)``.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from typing import Sequence

from .fixedpoint import to_field
from .prng import PinnedPRNG, prng_block

NONCE_BITS = 254
NONCE_MASK = (1 << NONCE_BITS) - 1


@dataclass(frozen=True)
class Identifier:
    digest: bytes
    iteration: int

    def hex(self) -> str:
        return self.digest.hex()


def gen_coefficients(client_seed: int, d: int, l: int, int_budget: int = 16) -> list[int]:
    """Raw coefficients at scale 2^l, uniform in [2^-l, 2^int_budget)."""
    if d < 1:
        raise ValueError("d must be >= 1")
    rng = PinnedPRNG(client_seed, "coeff")
    return [rng.randrange(1, 1 << (int_budget + l)) for _ in range(d)]


def nonce(shared_seed: int, i: int) -> int:
    """254-bit nonce for iteration i (i = 0 tags the initial state)."""
    if i < 0:
        raise ValueError("iteration index must be >= 0")
    return int.from_bytes(prng_block(shared_seed, b"nonce", i), "little") & NONCE_MASK


def preimage(full: Sequence[int], v: Sequence[int]) -> int:
    if len(full) != len(v):
        raise ValueError(f"state has {len(full)} entries, coefficients {len(v)}")
    return sum(a * b for a, b in zip(full, v))


def exact_full(params: Sequence[int], l: int) -> list[int]:
    return [p << (3 * l) for p in params]


def payload(P: int, nonce_value: int, p: int) -> bytes:
    return to_field(P, p).to_bytes(32, "little") + nonce_value.to_bytes(32, "little")


def identifier_from_preimage(P: int, nonce_value: int, p: int, iteration: int = 0) -> Identifier:
    return Identifier(hashlib.sha256(payload(P, nonce_value, p)).digest(), iteration)


def identifier(params: Sequence[int], v: Sequence[int], nonce_value: int, l: int, p: int,
               iteration: int = 0, full: Sequence[int] | None = None) -> Identifier:
    """Identifier of a state; pass ``full`` for the untruncated step output."""
    f = full if full is not None else exact_full(params, l)
    return identifier_from_preimage(preimage(f, v), nonce_value, p, iteration)


def authenticity_tolerance(v: Sequence[int], l: int, d: int, strict: bool = False) -> int:
    """Raw bound at scale 2^(5l): (d / 2^l) * sum(v), or 2^-l * sum(v) when strict."""
    base = sum(v) << (3 * l)
    return base if strict else d * base


def input_authenticity_check(preimage_sum: int, input_state: Sequence[int], v: Sequence[int], l: int,
                             d: int | None = None, strict: bool = False) -> bool:
    d = len(v) if d is None else d
    diff = preimage_sum - (preimage(input_state, v) << (3 * l))
    tol = authenticity_tolerance(v, l, d, strict)
    if strict:
        return 0 <= diff < tol
    return -tol < diff < tol


def field_capacity_ok(l: int, int_budget: int, d: int, p: int) -> bool:
    """Whether |P| stays below p/2 for any in-budget state (checked at task setup)."""
    bound = d * (1 << (int_budget + l)) * (1 << (int_budget + 4 * l + 1))
    return 2 * bound < p


@dataclass
class Commitment:
    task_id: str
    identifiers: list[bytes]
    params_digest: str = ""
    meta: dict = field(default_factory=dict)

    @property
    def N(self) -> int:
        return len(self.identifiers)

    def __getitem__(self, i: int) -> bytes:
        """1-based access matching iteration numbers."""
        if not 1 <= i <= self.N:
            raise IndexError(i)
        return self.identifiers[i - 1]

    def dumps(self) -> str:
        head = {"task_id": self.task_id, "N": self.N, "params_digest": self.params_digest, **self.meta}
        lines = [json.dumps(head, sort_keys=True)] + [d.hex() for d in self.identifiers]
        return "\n".join(lines) + "\n"

    @classmethod
    def loads(cls, text: str) -> Commitment:
        lines = text.strip("\n").split("\n")
        head = json.loads(lines[0])
        ids = [bytes.fromhex(x) for x in lines[1:]]
        if len(ids) != head["N"]:
            raise ValueError(f"commitment header says N={head['N']} but lists {len(ids)} identifiers")
        meta = {k: v for k, v in head.items() if k not in ("task_id", "N", "params_digest")}
        return cls(head["task_id"], ids, head.get("params_digest", ""), meta)
