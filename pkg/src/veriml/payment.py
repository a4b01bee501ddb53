"""Hash-locked fair exchange on a simulated ledger.

The server encrypts the delivery under a key ``k`` and publishes
``h = SHA-256(k)``; the client escrows the fee against ``h``.  Redeeming the
escrow requires presenting ``k``, which the ledger then exposes to the client;
after the timeout the client can take the fee back instead.
"""

from __future__ import annotations

import hashlib
import json
import struct
from collections import deque
from dataclasses import asdict, dataclass, field

OPEN, REDEEMED, REFUNDED = "open", "redeemed", "refunded"


class EscrowError(RuntimeError):
    pass


class InsufficientBalance(EscrowError):
    pass


class ClosedTx(EscrowError):
    pass


class TimeoutNotReached(EscrowError):
    pass


class Expired(EscrowError):
    pass


def keystream(k: bytes, n: int) -> bytes:
    out = bytearray()
    i = 0
    while len(out) < n:
        out += hashlib.sha256(k + struct.pack("<Q", i)).digest()
        i += 1
    return bytes(out[:n])


def encrypt_delivery(k: bytes, plaintext: bytes) -> bytes:
    """XOR with blocks SHA-256(k || i_le64); the same call decrypts."""
    if len(k) != 32:
        raise ValueError("key must be 32 bytes")
    ks = keystream(k, len(plaintext))
    return bytes(a ^ b for a, b in zip(plaintext, ks))


decrypt_delivery = encrypt_delivery


def lock(k: bytes) -> bytes:
    return hashlib.sha256(k).digest()


@dataclass
class EscrowTx:
    txid: int
    payer: str
    payee: str
    h: bytes
    fee: int
    timeout: int
    state: str = OPEN
    preimage: bytes | None = None  # public once redeemed

    def to_json(self) -> dict:
        d = asdict(self)
        d["h"] = self.h.hex()
        d["preimage"] = self.preimage.hex() if self.preimage is not None else None
        return d

    @classmethod
    def from_json(cls, d: dict) -> EscrowTx:
        d = dict(d)
        d["h"] = bytes.fromhex(d["h"])
        d["preimage"] = bytes.fromhex(d["preimage"]) if d.get("preimage") else None
        return cls(**d)


@dataclass
class Ledger:
    accounts: dict[str, int] = field(default_factory=dict)
    txs: list[EscrowTx] = field(default_factory=list)
    clock: int = 0

    def balance(self, acct: str) -> int:
        return self.accounts.get(acct, 0)

    def escrowed(self) -> int:
        return sum(t.fee for t in self.txs if t.state == OPEN)

    def total(self) -> int:
        return sum(self.accounts.values()) + self.escrowed()

    def tick(self, n: int = 1) -> int:
        if n < 0:
            raise ValueError("the clock only moves forward")
        self.clock += n
        return self.clock

    def to_json(self) -> dict:
        return {"accounts": dict(self.accounts), "clock": self.clock, "txs": [t.to_json() for t in self.txs]}

    @classmethod
    def from_json(cls, d: dict) -> Ledger:
        return cls(dict(d["accounts"]), [EscrowTx.from_json(t) for t in d.get("txs", [])], int(d.get("clock", 0)))

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True)

    @classmethod
    def loads(cls, text: str) -> Ledger:
        return cls.from_json(json.loads(text))

    def copy(self) -> Ledger:
        return Ledger.from_json(self.to_json())


def post_escrow(ledger: Ledger, payer: str, h: bytes, fee: int, timeout: int, payee: str = "server") -> EscrowTx:
    if fee < 0:
        raise ValueError("fee must be non-negative")
    if len(h) != 32:
        raise ValueError("lock digest must be 32 bytes")
    if ledger.balance(payer) < fee:
        raise InsufficientBalance(f"{payer} holds {ledger.balance(payer)} < fee {fee}")
    ledger.accounts[payer] -= fee
    tx = EscrowTx(len(ledger.txs), payer, payee, bytes(h), fee, timeout)
    ledger.txs.append(tx)
    return tx


def _tx(ledger: Ledger, tx: EscrowTx | int) -> EscrowTx:
    return ledger.txs[tx if isinstance(tx, int) else tx.txid]


def redeem(ledger: Ledger, tx: EscrowTx | int, preimage: bytes) -> bool:
    t = _tx(ledger, tx)
    if t.state != OPEN:
        raise ClosedTx(f"escrow {t.txid} is {t.state}")
    if ledger.clock >= t.timeout:
        raise Expired(f"escrow {t.txid} timed out at tick {t.timeout}")
    if hashlib.sha256(preimage).digest() != t.h:
        return False
    t.state, t.preimage = REDEEMED, bytes(preimage)
    ledger.accounts[t.payee] = ledger.balance(t.payee) + t.fee
    return True


def refund(ledger: Ledger, tx: EscrowTx | int) -> bool:
    t = _tx(ledger, tx)
    if t.state != OPEN:
        raise ClosedTx(f"escrow {t.txid} is {t.state}")
    if ledger.clock < t.timeout:
        raise TimeoutNotReached(f"escrow {t.txid} refundable from tick {t.timeout}, now {ledger.clock}")
    t.state = REFUNDED
    ledger.accounts[t.payer] = ledger.balance(t.payer) + t.fee
    return True


# -- fairness model check ------------------------------------------------------

@dataclass(frozen=True)
class ExchangeState:
    ct_sent: bool
    tx: str  # "none" or the escrow's state
    clock: int
    client_decrypts: bool
    server_paid: bool


def enumerate_exchange(fee: int = 5, timeout: int = 3, balance: int = 10, max_states: int = 10_000,
                       escrow_requires_ct: bool = True) -> dict:
    """Breadth-first search over every interleaving of both parties' moves.

    Moves: the server sends the ciphertext, redeems with the right or a wrong
    key; the client escrows (only after receiving the ciphertext, as the
    protocol prescribes) or refunds; the clock ticks up to one past the
    timeout.  Each move runs the real ledger operations and is unavailable
    when they refuse.  The ciphertext is assumed encrypted under the key
    behind the lock.  Returns counts and every state that breaks a fairness
    predicate or balance conservation.  ``escrow_requires_ct=False`` lets the
    client pay before delivery, a broken ordering the search should flag.
    """
    k, wrong = b"\x11" * 32, b"\x22" * 32
    plain = b'{"model": [1, 2, 3]}'
    ct = encrypt_delivery(k, plain)
    start = Ledger({"client": balance, "server": 0})
    total0 = start.total()

    def send(L, sent):
        return L, True

    def escrow(L, sent):
        if (escrow_requires_ct and not sent) or L.txs:
            raise EscrowError("escrow needs the ciphertext and happens once")
        post_escrow(L, "client", lock(k), fee, timeout)
        return L, sent

    def redeem_ok(L, sent):
        redeem(L, 0, k)
        return L, sent

    def redeem_bad(L, sent):
        if redeem(L, 0, wrong):
            raise AssertionError("wrong preimage accepted")
        return L, sent

    def do_refund(L, sent):
        refund(L, 0)
        return L, sent

    def tick(L, sent):
        if L.clock > timeout:
            raise EscrowError("clock bound reached")
        L.tick()
        return L, sent

    moves = (send, escrow, redeem_ok, redeem_bad, do_refund, tick)
    seen: set = set()
    queue = deque([(start, False)])
    violations, transitions = [], 0
    while queue:
        led, sent = queue.popleft()
        t = led.txs[0] if led.txs else None
        kk = (sent, t.state if t else "none", led.clock, led.balance("client"), led.balance("server"))
        if kk in seen:
            continue
        seen.add(kk)
        if len(seen) > max_states:
            raise RuntimeError("state space larger than the enumeration bound")
        key = t.preimage if t is not None else None
        decrypts = sent and key is not None and decrypt_delivery(key, ct) == plain
        paid = led.balance("server") > 0
        s = ExchangeState(sent, kk[1], led.clock, decrypts, paid)
        if (decrypts and not paid) or (paid and not decrypts) or led.total() != total0:
            violations.append(s)
        for mv in moves:
            nl = led.copy()
            try:
                queue.append(mv(nl, sent))
            except (EscrowError, IndexError):
                continue
            transitions += 1
    return {"states": len(seen), "transitions": transitions, "violations": violations}
