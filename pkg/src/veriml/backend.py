"""Proof backend interface and the transparent re-execution backend.

The transparent backend's proof is the full witness assignment: verification
re-checks every constraint.  It is complete and exactly sound but neither
succinct nor zero-knowledge; the security parameter is recorded and unused.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .r1cs import Assignment, Circuit, Visibility

PROOF_MAGIC = b"VMLP"


class UnsatisfiedError(ValueError):
    def __init__(self, index: int, label: str = ""):
        super().__init__(f"assignment violates constraint {index}" + (f" of {label}" if label else ""))
        self.index = index


class DigestMismatch(ValueError):
    pass


class LayoutMismatch(ValueError):
    pass


@dataclass(frozen=True)
class EvalKey:
    circuit_digest: bytes
    backend_tag: str
    security: int
    circuit: Circuit = field(repr=False, compare=False)


@dataclass(frozen=True)
class VerifKey:
    circuit_digest: bytes
    backend_tag: str
    layout: tuple  # ((name, count, visibility), ...) for public wires, in wire order
    circuit: Circuit = field(repr=False, compare=False)


@dataclass
class Proof:
    backend_tag: str
    circuit_digest: bytes
    small: np.ndarray  # witness wires as signed int64 where they fit
    big: dict[int, int]  # offset -> value for the rest

    def to_bytes(self, p: int) -> bytes:
        tag = self.backend_tag.encode()
        vals = self.small.tolist()
        for k, v in self.big.items():
            vals[k] = v
        out = [PROOF_MAGIC, struct.pack("<H", len(tag)), tag, self.circuit_digest, struct.pack("<Q", len(vals))]
        for v in vals:
            b = (v % p).to_bytes(((v % p).bit_length() + 7) // 8, "little")
            out.append(struct.pack("<B", len(b)) + b)
        return b"".join(out)

    @classmethod
    def from_bytes(cls, data: bytes, p: int) -> Proof:
        if data[:4] != PROOF_MAGIC:
            raise ValueError("not a proof file (bad magic)")
        (tl,) = struct.unpack_from("<H", data, 4)
        pos = 6
        tag = data[pos : pos + tl].decode()
        pos += tl
        digest = data[pos : pos + 32]
        pos += 32
        (n,) = struct.unpack_from("<Q", data, pos)
        pos += 8
        half = p // 2
        small = np.zeros(n, dtype=np.int64)
        big = {}
        for k in range(n):
            ln = data[pos]
            v = int.from_bytes(data[pos + 1 : pos + 1 + ln], "little")
            pos += 1 + ln
            if v > half:
                v -= p
            if -(1 << 62) < v < (1 << 62):
                small[k] = v
            else:
                big[k] = v
        if pos != len(data):
            raise ValueError("trailing bytes in proof file")
        return cls(tag, digest, small, big)


def public_layout(c: Circuit) -> tuple:
    return tuple(
        (name, len(idx), int(c.input_vis[name]))
        for name, idx in c.inputs.items()
        if c.input_vis[name] != Visibility.WITNESS
    )


class ProofBackend:
    tag = "abstract"

    def keygen(self, circuit: Circuit, security: int = 128) -> tuple[EvalKey, VerifKey]:
        raise NotImplementedError

    def prove(self, ek: EvalKey, public_inputs: dict, witness: Assignment) -> Proof:
        raise NotImplementedError

    def verify(self, vk: VerifKey, public_io: dict, proof: Proof) -> bool:
        raise NotImplementedError


class TransparentBackend(ProofBackend):
    tag = "transparent"

    def keygen(self, circuit: Circuit, security: int = 128):
        if not circuit.frozen:
            raise ValueError("keygen needs a frozen circuit")
        d = circuit.digest()
        return (EvalKey(d, self.tag, security, circuit),
                VerifKey(d, self.tag, public_layout(circuit), circuit))

    def prove(self, ek: EvalKey, public_inputs: dict, witness: Assignment) -> Proof:
        c = ek.circuit
        for name, vals in public_inputs.items():
            c.set_input(witness, name, vals)
        res = c.evaluate(witness)
        if not res.satisfied:
            raise UnsatisfiedError(res.first_violation, c.label)
        start = _n_prefix(c)
        big = {i - start: v for i, v in witness.big.items() if i >= start}
        return Proof(self.tag, ek.circuit_digest, witness.small[start:].copy(), big)

    def assemble(self, vk: VerifKey, public_io: dict, proof: Proof) -> Assignment:
        if proof.circuit_digest != vk.circuit_digest:
            raise DigestMismatch("proof was produced for a different circuit")
        c = vk.circuit
        names = {name for name, _, _ in vk.layout}
        if set(public_io) != names:
            raise LayoutMismatch(f"public io names {sorted(public_io)} != {sorted(names)}")
        start = _n_prefix(c)
        if len(proof.small) != c.n_wires - start:
            raise LayoutMismatch("witness length does not match the circuit")
        z = c.new_assignment()
        z.small[start:] = proof.small
        z.assigned[:] = True
        for k, v in proof.big.items():
            z.small[start + k] = 0
            z.big[start + k] = v
        for name, vals in public_io.items():
            c.set_input(z, name, vals)
        return z

    def verify(self, vk: VerifKey, public_io: dict, proof: Proof) -> bool:
        z = self.assemble(vk, public_io, proof)
        return vk.circuit.evaluate(z).satisfied


def _n_prefix(c: Circuit) -> int:
    n = 1
    while n < c.n_wires and c.visibility[n] != Visibility.WITNESS:
        n += 1
    return n


BACKENDS = {"transparent": TransparentBackend}


def get_backend(name: str = "transparent") -> ProofBackend:
    try:
        return BACKENDS[name]()
    except KeyError:
        raise ValueError(f"unknown backend {name!r}") from None
