"""Acceptance suite: one PASS/FAIL line per criterion.

Run with ``pytest tests/test_acceptance.py -v`` (lines go through the
terminal reporter, so output capture does not hide them) or directly with ``python3 tests/test_acceptance.py``.
"""

import math
import sys
import time
from fractions import Fraction
from math import comb
from pathlib import Path

import pytest

from veriml.commitment import gen_coefficients, identifier_from_preimage, nonce, preimage
from veriml.dataio import synth
from veriml.experiments import bitlength_accuracy, logreg_accuracy, sup_error
from veriml.gadgets import core, ml
from veriml.models.base import TrainConfig
from veriml.payment import (
    ClosedTx,
    Expired,
    InsufficientBalance,
    Ledger,
    TimeoutNotReached,
    enumerate_exchange,
    lock,
    post_escrow,
    redeem,
    refund,
)
from veriml.prng import PinnedPRNG
from veriml.protocol.client import PROOF_INVALID
from veriml.protocol.sampling import detection_probability, storage_cost
from veriml.protocol.server import retrieve, server_train
from veriml.protocol.session import run_session
from veriml.protocol.task import TaskSpec, prepare_data
from veriml.r1cs import BN254, Circuit, FieldConfig, measure
from veriml.tamper import TamperingServer, forged_set

ROOT = Path(__file__).resolve().parent.parent


def report(n: int, ok: bool, detail: str, seconds: float, write=None) -> None:
    line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}  [{seconds:.1f}s]"
    if write is None:
        print(line, flush=True)
    else:
        write(line)


def within_3sigma(hits: int, trials: int, p: float) -> tuple[bool, float, float]:
    rate = hits / trials
    sigma = math.sqrt(p * (1 - p) / trials)
    return abs(rate - p) <= 3 * sigma, rate, sigma


# -- 1 -------------------------------------------------------------------------

def check_1():
    p10 = detection_probability(100_000, Fraction(7, 10), 10)
    p14 = detection_probability(100_000, Fraction(7, 10), 14)
    return p10 > Fraction(95, 100) and p14 > Fraction(99, 100), f"P(10)={float(p10):.5f} P(14)={float(p14):.5f}", 1


# -- 2 -------------------------------------------------------------------------

def check_2(trials: int = 1000):
    N, c = 1000, 14
    ds = synth("regression", N, 2, 3, 16)
    spec = TaskSpec("linreg", TrainConfig(batch_size=1, frac_bits=16, max_epochs=1), {"d": 2}, ds.digest,
                    interval=50)
    hits = 0
    for trial in range(trials):
        srv = TamperingServer(spec, ds, "skip", forged_set(N, Fraction(7, 10), trial), seed=trial)
        assert srv.commitment.N == N
        hits += not run_session(srv, c, 1_000_003 + trial).verdict.accept
    p = 1 - comb(700, c) / comb(1000, c)
    ok, rate, sigma = within_3sigma(hits, trials, p)
    return ok, f"empirical {rate:.4f} vs exact {p:.4f} (3 sigma = {3 * sigma:.4f})", 300


# -- 3 -------------------------------------------------------------------------

def check_3(trials: int = 10_000):
    F = FieldConfig(101, "p101")
    rng = PinnedPRNG(3, "freivald-acceptance")
    accepted = 0
    for _ in range(trials):
        A = [[rng.randbelow(101) for _ in range(3)] for _ in range(2)]
        B = [[rng.randbelow(101) for _ in range(3)] for _ in range(3)]
        r = [rng.randbelow(101) for _ in range(3)]
        c = Circuit(F)
        Ai = [c.public_input(f"a{i}", 3) for i in range(2)]
        Bi = [c.public_input(f"b{k}", 3) for k in range(3)]
        Ci = ml.matmul_witness(c, Ai, Bi)
        ml.freivald_matmul_check(c, Ai, Bi, Ci, r)
        c.freeze()
        z = c.solve({**{f"a{i}": A[i] for i in range(2)}, **{f"b{k}": B[k] for k in range(3)}})
        wire = Ci[rng.randbelow(2)][rng.randbelow(3)].single_wire()
        z[wire] = z[wire] + 1 + rng.randbelow(100)  # one entry off by a nonzero amount
        accepted += bool(c.evaluate(z))
    bound = 1 / 102
    sigma = math.sqrt(bound * (1 - bound) / trials)
    rate = accepted / trials
    return rate <= bound + 3 * sigma, f"false accept {rate:.4f} <= {bound + 3 * sigma:.4f}", 60


# -- 4 -------------------------------------------------------------------------

def _cost(build):
    c = Circuit(BN254)
    with measure(c) as m:
        build(c)
    return m.cost.constraints


def _sgd(c, b, d, variable):
    X = [c.public_input(f"x{k}", d) for k in range(b)]
    Y = c.public_input("y", b)
    a = c.public_input("alpha") if variable else 3
    ml.sgd_linreg_step(c, c.witness_input("w", d), X, Y, a, 16)


def _freivald(c, b, n_in, n_out):
    A = [c.witness_input(f"a{k}", n_in) for k in range(b)]
    B = [c.witness_input(f"b{k}", n_out) for k in range(n_in)]
    C = ml.matmul_witness(c, A, B)
    return A, B, C


def check_4():
    split32 = _cost(lambda c: core.split(c, c.witness_input("x"), 32))
    d, b = 13, 8
    fixed = _cost(lambda c: _sgd(c, b, d, False))
    delta = _cost(lambda c: _sgd(c, b + 1, d, False)) - fixed
    var = _cost(lambda c: _sgd(c, b, d, True)) - fixed
    c = Circuit(BN254)
    A, B, C = _freivald(c, 8, 20, 16)
    with measure(c) as m:
        ml.freivald_matmul_check(c, A, B, C, list(range(1, 17)))
    fv = m.cost.constraints
    ok = split32 == 34 and delta == 2 * d and var == d and fv == 8 * 20
    return ok, f"split(32)={split32} batch delta={delta} (2d={2 * d}) variable alpha=+{var} freivald={fv} (b*n=160)", 10


# -- 5 -------------------------------------------------------------------------

def check_5():
    rows = bitlength_accuracy()
    errs = [float(r["relative_error"]) for r in rows]
    e32 = float(next(r for r in rows if r["l"] == 32)["relative_error"])
    ok = all(a >= b for a, b in zip(errs, errs[1:])) and e32 <= 1e-3
    return ok, "errors " + " ".join(f"l={r['l']}:{r['relative_error']}" for r in rows), 120


# -- 6 -------------------------------------------------------------------------

def check_6():
    sr, st = sup_error("remez"), sup_error("taylor")
    acc_r = [logreg_accuracy("remez", s) for s in range(10)]
    acc_t = [logreg_accuracy("taylor", s) for s in range(10)]
    mr, mt = sum(acc_r) / 10, sum(acc_t) / 10
    ok = sr < st and mr >= mt
    return ok, f"sup remez {sr:.4f} < taylor {st:.4f}; accuracy remez {mr:.4f} >= taylor {mt:.4f}", 120


# -- 7 -------------------------------------------------------------------------

def check_7():
    ds = synth("regression", 506, 13, 1, 32)
    spec = TaskSpec("linreg", TrainConfig(batch_size=1, frac_bits=32, max_epochs=4, alpha="0.01"), {"d": 13},
                    ds.digest, interval=50)
    res = server_train(spec, ds)
    data = prepare_data(spec, ds)
    N = res.commitment.N
    bad = 0
    for i in range(1, N + 1):
        _, P, _ = retrieve(res.store, i, spec, data)
        bad += identifier_from_preimage(P, nonce(spec.batch_seed, i), spec.p).digest != res.commitment[i]
    sc = storage_cost(32, 13, 10_000, 50)
    ok = N >= 2000 and bad == 0 and sc == 83_200
    return ok, f"N={N} mismatches={bad} storage_cost={sc} bits ({sc / 8 / 1000:.1f} KB)", 600


# -- 8 -------------------------------------------------------------------------

def check_8(trials: int = 100_000):
    ds = synth("regression", 64, 4, 1, 16)
    spec = TaskSpec("linreg", TrainConfig(batch_size=4, frac_bits=16), {"d": 4}, ds.digest, interval=5)
    N = server_train(spec, ds).commitment.N
    srv = TamperingServer(spec, ds, "zero-state", forged_set(N, 0, 1))
    tr = run_session(srv, 3, 5)
    zero_rejected = not tr.verdict.accept and tr.verdict.reason == PROOF_INVALID
    unauth = not any(r.authentic for r in tr.responses)
    # forged state against genuine state, identifiers truncated to their first 8 bits
    rng = PinnedPRNG(8, "collision")
    l, d, hits = 16, 4, 0
    for t in range(trials):
        v = gen_coefficients(t, d, l)
        w = [rng.randrange(-(1 << l), 1 << l) for _ in range(d)]
        w_fake = [rng.randrange(-(1 << l), 1 << l) for _ in range(d)]
        n = nonce(9, t)
        a = identifier_from_preimage(preimage(w, v), n, spec.p).digest
        b = identifier_from_preimage(preimage(w_fake, v), n, spec.p).digest
        hits += a[0] == b[0] and w != w_fake
    ok_rate, rate, sigma = within_3sigma(hits, trials, 2**-8)
    ok = zero_rejected and unauth and ok_rate
    return ok, (f"zero-state -> {tr.verdict.reason}; 8-bit collision rate {rate:.5f} vs {2**-8:.5f} "
                f"(3 sigma = {3 * sigma:.5f})"), 300


# -- 9 -------------------------------------------------------------------------

def check_9(sequences: int = 10_000):
    res = enumerate_exchange()
    rng = PinnedPRNG(9, "ledger-ops")
    k = b"\x05" * 32
    broken = 0
    for _ in range(sequences):
        L = Ledger({"client": 50, "server": 10})
        total = L.total()
        for _ in range(rng.randrange(1, 30)):
            op = rng.randbelow(5)
            try:
                if op == 0:
                    post_escrow(L, "client", lock(k), rng.randbelow(20), L.clock + rng.randbelow(5))
                elif op == 1 and L.txs:
                    redeem(L, rng.randbelow(len(L.txs)), k if rng.randbelow(2) else b"\x00" * 32)
                elif op == 2 and L.txs:
                    refund(L, rng.randbelow(len(L.txs)))
                elif op == 3:
                    L.tick(rng.randbelow(3))
            except (ClosedTx, Expired, TimeoutNotReached, InsufficientBalance):
                pass
            if L.total() != total or min(L.accounts.values()) < 0:
                broken += 1
                break
    ok = not res["violations"] and res["states"] <= 10_000 and broken == 0
    return ok, f"{res['states']} states, {len(res['violations'])} violations; {broken}/{sequences} sequences broke conservation", 60


# -- 10 ------------------------------------------------------------------------

def check_10(tmp=None):
    import tempfile

    from veriml.cli import main

    codes = {}
    with tempfile.TemporaryDirectory(dir=tmp) as d:
        for kind in ("linreg", "logreg", "svm", "kmeans", "nn", "tree"):
            codes[kind] = main(["run", "--task", str(ROOT / "configs" / f"{kind}.json"), "--out", f"{d}/{kind}",
                                "--challenges", "14"])
    ok = all(v == 0 for v in codes.values())
    return ok, " ".join(f"{k}:{v}" for k, v in codes.items()), 900


CHECKS = {n: globals()[f"check_{n}"] for n in range(1, 11)}


def run_check(n, write=None):
    t0 = time.perf_counter()
    ok, detail, limit = CHECKS[n]()
    dt = time.perf_counter() - t0
    ok = ok and dt < limit
    report(n, ok, detail + ("" if dt < limit else f"; over the {limit}s budget"), dt, write)
    return ok


@pytest.mark.parametrize("n", range(1, 11))
def test_criterion(n, request):
    # the terminal reporter writes past output capture
    tr = request.config.pluginmanager.get_plugin("terminalreporter")

    def write(line):
        tr.ensure_newline()
        tr.write_line(line)

    assert run_check(n, write if tr is not None else None)


if __name__ == "__main__":
    results = [run_check(n) for n in (sys.argv[1:] and map(int, sys.argv[1:]) or range(1, 11))]
    sys.exit(0 if all(results) else 1)
