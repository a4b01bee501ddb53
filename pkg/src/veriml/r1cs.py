"""Rank-1 constraint systems over a prime field.

A circuit is a list of constraints ``<a,z> * <b,z> = <c,z>`` over a wire
vector ``z`` whose entry 0 is the constant 1.  Public wires (inputs and
outputs) form a contiguous prefix after wire 0; everything else is witness.

Witness generation is driven by *solvers*: callables registered while the
circuit is built and run in registration order against an
:class:`Assignment`.  Satisfaction checking is vectorised with int64 sparse
products for every constraint whose magnitudes provably fit, and falls back to
exact Python integers for the rest.
"""

from __future__ import annotations

import hashlib
import os
import struct
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Callable, Iterable, Sequence

import numpy as np
import scipy.sparse as sp

BN254_R = 0x30644E72E131A029B85045B68181585D2833E84879B9709143E1F593F0000001

_SMALL = 1 << 62
_SAFE = float(1 << 60)


@dataclass(frozen=True)
class FieldConfig:
    modulus: int
    name: str

    @property
    def bits(self) -> int:
        return self.modulus.bit_length()


# version-pinned: changing this constant changes every circuit digest
FIELD_VERSION = 1
BN254 = FieldConfig(BN254_R, "bn254-r")
M31 = FieldConfig((1 << 31) - 1, "m31")
M61 = FieldConfig((1 << 61) - 1, "m61")
_NAMED = {f.name: f for f in (BN254, M31, M61)}
_NAMED["bn254"] = BN254


def field_by_name(name: str) -> FieldConfig:
    name = name.strip().lower()
    if name in _NAMED:
        return _NAMED[name]
    digits = name[1:] if name.startswith("p") else name
    if digits.isdigit():
        return FieldConfig(int(digits), f"p{digits}")
    raise ValueError(f"unknown field {name!r}")


def default_field() -> FieldConfig:
    """The pinned 254-bit field, unless ``VERIML_FIELD`` overrides it."""
    env = os.environ.get("VERIML_FIELD")
    return field_by_name(env) if env else BN254


class Visibility(IntEnum):
    ONE = 0
    PUBLIC_INPUT = 1
    PUBLIC_OUTPUT = 2
    WITNESS = 3


@dataclass(frozen=True)
class Wire:
    index: int
    visibility: Visibility


class CircuitFrozen(RuntimeError):
    pass


class UnknownWire(IndexError):
    pass


class MissingWireValue(KeyError):
    pass


class LC:
    """Sparse linear combination ``sum(coeff * z[wire])``."""

    __slots__ = ("terms",)

    def __init__(self, terms: dict[int, int] | None = None):
        self.terms = terms if terms is not None else {}

    @staticmethod
    def const(c: int) -> LC:
        return LC({0: c} if c else {})

    @staticmethod
    def wire(i: int) -> LC:
        return LC({i: 1})

    def copy(self) -> LC:
        return LC(dict(self.terms))

    def is_const(self) -> bool:
        t = self.terms
        return not t or (len(t) == 1 and 0 in t)

    def const_value(self) -> int:
        return self.terms.get(0, 0)

    def single_wire(self) -> int | None:
        """Index if this LC is exactly ``1 * z[i]``."""
        if len(self.terms) == 1:
            (i, c), = self.terms.items()
            if c == 1 and i != 0:
                return i
        return None

    def _merge(self, other, sign: int) -> LC:
        if isinstance(other, int):
            other = LC.const(other)
        out = dict(self.terms)
        for i, c in other.terms.items():
            v = out.get(i, 0) + sign * c
            if v:
                out[i] = v
            else:
                out.pop(i, None)
        return LC(out)

    def __add__(self, other) -> LC:
        return self._merge(other, 1)

    __radd__ = __add__

    def __sub__(self, other) -> LC:
        return self._merge(other, -1)

    def __rsub__(self, other) -> LC:
        return (-self)._merge(other, 1)

    def __neg__(self) -> LC:
        return LC({i: -c for i, c in self.terms.items()})

    def __mul__(self, k: int) -> LC:
        if not isinstance(k, int):
            return NotImplemented
        if k == 0:
            return LC()
        return LC({i: c * k for i, c in self.terms.items()})

    __rmul__ = __mul__

    def __repr__(self) -> str:
        return "LC(" + " + ".join(f"{c}*z{i}" for i, c in sorted(self.terms.items())) + ")"


LCLike = LC | int


def as_lc(x: LCLike) -> LC:
    return x if isinstance(x, LC) else LC.const(x)


def lc_sum(items: Iterable[LCLike]) -> LC:
    out: dict[int, int] = {}
    for it in items:
        if isinstance(it, int):
            if it:
                out[0] = out.get(0, 0) + it
            continue
        for i, c in it.terms.items():
            out[i] = out.get(i, 0) + c
    return LC({i: c for i, c in out.items() if c})


class Assignment:
    """Wire values as signed representatives in ``(-p/2, p/2]``.

    Values below 2^62 in magnitude live in an int64 array; larger ones in a
    dict, so mostly-boolean circuits can be checked with numpy.
    """

    def __init__(self, n: int, p: int):
        self.p = p
        self.half = p // 2
        self.small = np.zeros(n, dtype=np.int64)
        self.big: dict[int, int] = {}
        self.assigned = np.zeros(n, dtype=bool)
        self.small[0] = 1
        self.assigned[0] = True

    def __len__(self) -> int:
        return len(self.small)

    def signed(self, v: int) -> int:
        v %= self.p
        return v - self.p if v > self.half else v

    def __setitem__(self, i: int, v: int) -> None:
        v %= self.p
        if v > self.half:
            v -= self.p
        if -_SMALL < v < _SMALL:
            self.small[i] = v
            if self.big:
                self.big.pop(i, None)
        else:
            self.small[i] = 0
            self.big[i] = v
        self.assigned[i] = True

    def __getitem__(self, i: int) -> int:
        b = self.big.get(i)
        return int(self.small[i]) if b is None else b

    def set_bits(self, indices: Sequence[int], value: int) -> None:
        """Write the low ``len(indices)`` bits of a non-negative ``value``."""
        idx = np.asarray(indices, dtype=np.int64)
        self.small[idx] = [(value >> k) & 1 for k in range(len(idx))]
        self.assigned[idx] = True
        if self.big:
            for i in indices:
                self.big.pop(i, None)

    def set_many(self, indices: Sequence[int], values: Sequence[int]) -> None:
        for i, v in zip(indices, values):
            self[i] = v

    def eval(self, lc: LCLike) -> int:
        if isinstance(lc, int):
            return self.signed(lc)
        big = self.big
        small = self.small
        acc = 0
        for i, c in lc.terms.items():
            b = big.get(i)
            acc += c * (int(small[i]) if b is None else b)
        return self.signed(acc)

    def copy(self) -> Assignment:
        out = Assignment.__new__(Assignment)
        out.p, out.half = self.p, self.half
        out.small = self.small.copy()
        out.big = dict(self.big)
        out.assigned = self.assigned.copy()
        return out

    def field_values(self) -> list[int]:
        """Canonical field elements in ``[0, p)``, one per wire."""
        vals = self.small.tolist()
        for i, v in self.big.items():
            vals[i] = v
        p = self.p
        return [v % p for v in vals]

    @classmethod
    def from_values(cls, values: Sequence[int], p: int) -> Assignment:
        a = cls(len(values), p)
        for i, v in enumerate(values):
            a[i] = v
        return a


@dataclass
class EvalResult:
    satisfied: bool
    first_violation: int | None = None

    def __bool__(self) -> bool:
        return self.satisfied


@dataclass(frozen=True)
class CircuitCount:
    constraints: int
    witness_wires: int
    public_wires: int
    raw_constraints: int


@dataclass
class _Matrix:
    indptr: list = field(default_factory=lambda: [0])
    cols: list = field(default_factory=list)
    coefs: list = field(default_factory=list)  # canonical, in [0, p)


class Circuit:
    def __init__(self, field_cfg: FieldConfig | None = None, label: str = ""):
        self.field = field_cfg or default_field()
        self.p = self.field.modulus
        self.label = label
        self.visibility: list[int] = [Visibility.ONE]
        self.inputs: dict[str, list[int]] = {}
        self.input_vis: dict[str, Visibility] = {}
        self.solvers: list[Callable[[Assignment], None]] = []
        self._m = (_Matrix(), _Matrix(), _Matrix())
        self.n_constraints = 0
        # surcharge reported by the nominal accounting policy (see gadgets.core.split)
        self.split_surcharge = 0
        self.frozen = False
        self._seen_witness = False
        self._compiled = None
        self._digest: bytes | None = None

    # -- building ---------------------------------------------------------
    @property
    def one(self) -> LC:
        return LC({0: 1})

    @property
    def n_wires(self) -> int:
        return len(self.visibility)

    def _check_open(self) -> None:
        if self.frozen:
            raise CircuitFrozen("circuit is frozen")

    def new_wire(self, visibility: Visibility = Visibility.WITNESS) -> Wire:
        self._check_open()
        if visibility == Visibility.ONE:
            raise ValueError("wire 0 is the only constant-one wire")
        if visibility == Visibility.WITNESS:
            self._seen_witness = True
        elif self._seen_witness:
            raise ValueError("public wires must be allocated before any witness wire")
        self.visibility.append(int(visibility))
        return Wire(len(self.visibility) - 1, Visibility(visibility))

    def new_var(self, visibility: Visibility = Visibility.WITNESS) -> LC:
        return LC.wire(self.new_wire(visibility).index)

    def _input(self, name: str, n: int | None, vis: Visibility):
        if name in self.inputs:
            raise ValueError(f"duplicate input {name!r}")
        count = 1 if n is None else n
        idx = [self.new_wire(vis).index for _ in range(count)]
        self.inputs[name] = idx
        self.input_vis[name] = vis
        lcs = [LC.wire(i) for i in idx]
        return lcs[0] if n is None else lcs

    def public_input(self, name: str, n: int | None = None):
        return self._input(name, n, Visibility.PUBLIC_INPUT)

    def public_output(self, name: str, n: int | None = None):
        return self._input(name, n, Visibility.PUBLIC_OUTPUT)

    def witness_input(self, name: str, n: int | None = None):
        """Witness wires whose values the prover supplies directly."""
        return self._input(name, n, Visibility.WITNESS)

    def enforce(self, a: LCLike, b: LCLike, c: LCLike) -> None:
        self._check_open()
        n = len(self.visibility)
        p = self.p
        for mat, lc in zip(self._m, (a, b, c)):
            terms = as_lc(lc).terms
            for i in sorted(terms):
                if not 0 <= i < n:
                    raise UnknownWire(i)
                v = terms[i] % p
                if v:
                    mat.cols.append(i)
                    mat.coefs.append(v)
            mat.indptr.append(len(mat.cols))
        self.n_constraints += 1

    def enforce_equal(self, a: LCLike, b: LCLike) -> None:
        self.enforce(as_lc(a) - as_lc(b), 1, 0)

    def solver(self, fn: Callable[[Assignment], None]) -> Callable[[Assignment], None]:
        self._check_open()
        self.solvers.append(fn)
        return fn

    def mul(self, a: LCLike, b: LCLike) -> LC:
        """Product of two linear combinations; one constraint unless either is constant."""
        a, b = as_lc(a), as_lc(b)
        if a.is_const():
            return b * a.const_value()
        if b.is_const():
            return a * b.const_value()
        out = self.new_wire().index
        self.enforce(a, b, LC.wire(out))

        def solve(z: Assignment, a=a, b=b, out=out):
            z[out] = z.eval(a) * z.eval(b)

        self.solvers.append(solve)
        return LC.wire(out)

    def materialize(self, x: LCLike) -> LC:
        """A fresh wire constrained equal to ``x`` (used where a gadget needs a wire)."""
        out = self.new_wire().index
        self.enforce(as_lc(x) - LC.wire(out), 1, 0)
        self.solvers.append(lambda z, x=as_lc(x), out=out: z.__setitem__(out, z.eval(x)))
        return LC.wire(out)

    def freeze(self) -> Circuit:
        self.frozen = True
        return self

    # -- witness generation ----------------------------------------------
    def new_assignment(self) -> Assignment:
        return Assignment(self.n_wires, self.p)

    def set_input(self, z: Assignment, name: str, values) -> None:
        idx = self.inputs[name]
        if not isinstance(values, (list, tuple, np.ndarray)):
            values = [values]
        if len(values) != len(idx):
            raise ValueError(f"input {name!r} expects {len(idx)} values, got {len(values)}")
        z.set_many(idx, [int(v) for v in values])

    def solve(self, inputs: dict[str, object]) -> Assignment:
        z = self.new_assignment()
        for name, vals in inputs.items():
            self.set_input(z, name, vals)
        for fn in self.solvers:
            fn(z)
        return z

    def public_indices(self) -> list[int]:
        return [i for i, v in enumerate(self.visibility) if v in (1, 2)]

    # -- checking ---------------------------------------------------------
    def _compile(self):
        if self._compiled is not None:
            return self._compiled
        n, m, p = self.n_wires, self.n_constraints, self.p
        half = p // 2
        mats, absmats = [], []
        slow_rows = np.zeros(m, dtype=bool)
        for mat in self._m:
            indptr = np.asarray(mat.indptr, dtype=np.int64)
            cols = np.asarray(mat.cols, dtype=np.int64)
            signed = [c - p if c > half else c for c in mat.coefs]
            ok = [abs(c) < (1 << 40) for c in signed]
            data = np.array([c if o else 0 for c, o in zip(signed, ok)], dtype=np.int64)
            absdata = np.abs(data).astype(np.float64)
            if not all(ok):
                bad = np.flatnonzero(~np.asarray(ok, dtype=bool))
                rows = np.searchsorted(indptr, bad, side="right") - 1
                slow_rows[rows] = True
            mats.append(sp.csr_matrix((data, cols, indptr), shape=(m, n)))
            absmats.append(sp.csr_matrix((absdata, cols, indptr), shape=(m, n)))
        self._compiled = (mats, absmats, slow_rows)
        return self._compiled

    def _row_value(self, k: int, which: int, z: Assignment) -> int:
        mat = self._m[which]
        acc = 0
        big, small = z.big, z.small
        for j in range(mat.indptr[k], mat.indptr[k + 1]):
            i = mat.cols[j]
            b = big.get(i)
            acc += mat.coefs[j] * (int(small[i]) if b is None else b)
        return acc % self.p

    def check_constraint(self, k: int, z: Assignment) -> bool:
        a = self._row_value(k, 0, z)
        b = self._row_value(k, 1, z)
        c = self._row_value(k, 2, z)
        return (a * b - c) % self.p == 0

    def evaluate(self, z: Assignment) -> EvalResult:
        if not isinstance(z, Assignment):
            z = Assignment.from_values(list(z), self.p)
        if len(z) != self.n_wires:
            raise MissingWireValue(f"assignment has {len(z)} wires, circuit has {self.n_wires}")
        if not z.assigned.all():
            missing = int(np.flatnonzero(~z.assigned)[0])
            raise MissingWireValue(f"wire {missing} has no value")
        if z[0] != 1:
            raise ValueError("assignment[0] must be 1")
        m = self.n_constraints
        if m == 0:
            return EvalResult(True, None)
        (A, B, C), (Aa, Ba, Ca), slow_rows = self._compile()
        zf = np.abs(z.small).astype(np.float64)
        if z.big:
            zf[list(z.big)] = np.inf
        with np.errstate(invalid="ignore", over="ignore"):
            ba, bb, bc = Aa @ zf, Ba @ zf, Ca @ zf
            safe = (ba * bb < _SAFE) & (bc < _SAFE) & ~slow_rows
            va, vb, vc = A @ z.small, B @ z.small, C @ z.small
            diff = va * vb - vc
        if self.p < (1 << 62):
            bad_fast = safe & (np.mod(diff, self.p) != 0)
        else:
            bad_fast = safe & (diff != 0)
        first = int(np.argmax(bad_fast)) if bad_fast.any() else None
        for k in np.flatnonzero(~safe).tolist():
            if first is not None and k >= first:
                break
            if not self.check_constraint(k, z):
                first = k
                break
        return EvalResult(first is None, first)

    # -- accounting & identity -------------------------------------------
    def count(self, policy: str = "nominal") -> CircuitCount:
        vis = self.visibility
        public = sum(1 for v in vis if v != Visibility.WITNESS)
        extra = self.split_surcharge if policy == "nominal" else 0
        if policy not in ("nominal", "raw"):
            raise ValueError(f"unknown accounting policy {policy!r}")
        return CircuitCount(self.n_constraints + extra, len(vis) - public, public, self.n_constraints)

    def digest(self) -> bytes:
        """SHA-256 over the canonical serialisation (field, wire table, constraints)."""
        if self._digest is not None and self.frozen:
            return self._digest
        h = hashlib.sha256()
        h.update(b"VERIML-R1CS\x01")
        h.update(_lp(self.p.to_bytes((self.p.bit_length() + 7) // 8, "little")))
        h.update(_lp(bytes(self.visibility)))
        h.update(struct.pack("<Q", self.n_constraints))
        width = (self.p.bit_length() + 7) // 8
        for mat in self._m:
            h.update(_lp(np.asarray(mat.indptr, dtype="<i8").tobytes()))
            h.update(_lp(np.asarray(mat.cols, dtype="<i8").tobytes()))
            table: dict[int, int] = {}
            codes = [table.setdefault(c, len(table)) for c in mat.coefs]
            uniq = sorted(table, key=table.get)
            rows = np.frombuffer(b"".join(c.to_bytes(width, "little") for c in uniq), dtype=np.uint8)
            rows = rows.reshape(len(uniq), width) if uniq else rows.reshape(0, width)
            h.update(_lp(rows[np.asarray(codes, dtype=np.int64)].tobytes() if codes else b""))
        d = h.digest()
        if self.frozen:
            self._digest = d
        return d


def _lp(b: bytes) -> bytes:
    return struct.pack("<Q", len(b)) + b


@dataclass(frozen=True)
class GadgetCost:
    constraints: int
    witness_wires: int
    raw_constraints: int = 0


@contextmanager
def measure(circuit: Circuit, policy: str = "nominal"):
    """Record the constraint/witness deltas of the enclosed gadget calls."""
    before = circuit.count(policy)
    box: dict[str, GadgetCost] = {}

    class _Handle:
        @property
        def cost(self) -> GadgetCost:
            return box["cost"]

    h = _Handle()
    yield h
    after = circuit.count(policy)
    box["cost"] = GadgetCost(
        after.constraints - before.constraints,
        after.witness_wires - before.witness_wires,
        after.raw_constraints - before.raw_constraints,
    )


def evaluate(circuit: Circuit, assignment) -> EvalResult:
    return circuit.evaluate(assignment)


def count(circuit: Circuit, policy: str = "nominal") -> CircuitCount:
    return circuit.count(policy)
