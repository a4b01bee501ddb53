"""Desk-scale experiments behind ``veriml bench``; each returns a list of CSV rows."""

from __future__ import annotations

import csv
import sys
import time
from fractions import Fraction

import numpy as np

from .approx import SIGMOID_COEFFS
from .dataio import Dataset, synth
from .fixedpoint import encode_raw
from .gadgets import core, ml
from .gadgets.sha256 import sha256_digest
from .models.base import ModelState, TrainConfig
from .models.linear import LinReg, LogReg
from .prng import PinnedPRNG
from .protocol.sampling import detection_probability, required_challenges, storage_cost
from .protocol.task import batch_indices, steps_per_epoch
from .r1cs import Circuit, measure

# -- sampling --------------------------------------------------------------------


def sampling_curve(seed: int = 0, N: int = 100_000) -> list[dict]:
    rows = []
    for t in ("0.5", "0.6", "0.7", "0.8", "0.9", "0.95"):
        for conf in ("0.9", "0.95", "0.99", "0.999"):
            c = required_challenges(N, Fraction(t), Fraction(conf))
            rows.append({"N": N, "t_frac": t, "confidence": conf, "c_required": c,
                         "detection_at_c": f"{float(detection_probability(N, Fraction(t), c)):.6f}",
                         "detection_at_c_minus_1": f"{float(detection_probability(N, Fraction(t), c - 1)):.6f}"})
    return rows


def interval_tradeoff(seed: int = 0, l: int = 32, d: int = 13, N: int = 10_000,
                      intervals=(1, 2, 5, 10, 25, 50, 100, 200, 400)) -> list[dict]:
    """Checkpoint storage against the native steps needed to rebuild a state."""
    rows = []
    for m in intervals:
        bits = storage_cost(l, d, N, m)
        # iteration i is rebuilt from the checkpoint at the largest j <= i with j = 1 mod m
        steps = [(i - 1) % m for i in range(1, N + 1)]
        rows.append({"m": m, "storage_bits": bits, "storage_kb": f"{bits / 8 / 1000:.2f}",
                     "mean_replay_steps": f"{sum(steps) / N:.2f}", "max_replay_steps": max(steps)})
    return rows


# -- fixed-point fidelity ------------------------------------------------------


def _linreg_fixed(ds: Dataset, w0: list[float], l: int, alpha: str, b: int, epochs: int, shared: int):
    cfg = TrainConfig(alpha=alpha, batch_size=b, frac_bits=l)
    alg = LinReg(cfg, {"d": ds.d})
    st = ModelState("linreg", [encode_raw(v, l) for v in w0], l)
    spe = steps_per_epoch(ds.n, b)
    i = 0
    for e in range(epochs):
        for s in range(spe):
            i += 1
            idx = batch_indices(shared, e, s, b, ds.n)
            st = alg.step(st, [ds.features[k] for k in idx], [ds.labels[k] for k in idx], i).state
    return np.array(st.floats())


def _linreg_float(X: np.ndarray, Y: np.ndarray, w0, alpha: float, b: int, epochs: int, shared: int):
    w = np.array(w0, dtype=np.float64)
    n = len(X)
    for e in range(epochs):
        for s in range(steps_per_epoch(n, b)):
            idx = batch_indices(shared, e, s, b, n)
            xb, yb = X[idx], Y[idx]
            w = w - (alpha / b) * xb.T @ (xb @ w - yb)
    return w


def bitlength_accuracy(seed: int = 0, n: int = 506, d: int = 13, ls=(4, 8, 16, 24, 32, 48),
                       alpha: str = "0.05", b: int = 8, epochs: int = 3) -> list[dict]:
    """Relative parameter error of fixed-point linreg against a float64 run on the same batches."""
    rng = PinnedPRNG(seed, "fidelity-init")
    w0 = [rng.uniform(-0.5, 0.5) for _ in range(d)]
    ref = synth("regression", n, d, seed, 52)
    X = np.array(ref.real_features())
    Y = np.array(ref.real_labels())
    wf = _linreg_float(X, Y, w0, float(alpha), b, epochs, seed + 1)
    rows = []
    for l in ls:
        t0 = time.perf_counter()
        ds = synth("regression", n, d, seed, l)
        wl = _linreg_fixed(ds, w0, l, alpha, b, epochs, seed + 1)
        err = float(np.linalg.norm(wl - wf) / np.linalg.norm(wf))
        rows.append({"l": l, "relative_error": f"{err:.3e}", "seconds": f"{time.perf_counter() - t0:.2f}"})
    return rows


# -- gadget costs --------------------------------------------------------------


def _cost(label: str, params: str, build) -> dict:
    c = Circuit(label=label)
    with measure(c) as m:
        build(c)
    cost = m.cost
    return {"gadget": label, "params": params, "constraints": cost.constraints,
            "raw_constraints": cost.raw_constraints, "witness_wires": cost.witness_wires}


def gadget_costs(seed: int = 0) -> list[dict]:
    rows = []
    for bits in (8, 16, 32, 64):
        rows.append(_cost("split", f"bits={bits}", lambda c, k=bits: core.split(c, c.witness_input("x"), k)))
    rows.append(_cost("compare_leq", "bits=32",
                      lambda c: core.compare_leq(c, c.witness_input("a"), c.witness_input("b"), 32)))
    rows.append(_cost("truncation_check", "shift=32",
                      lambda c: core.truncate(c, c.witness_input("x"), 32)))
    rows.append(_cost("inner_product", "n=13",
                      lambda c: core.inner_product(c, c.witness_input("x", 13), c.witness_input("y", 13))))
    rows.append(_cost("is_zero", "", lambda c: core.is_zero(c, c.witness_input("x"))))
    rows.append(_cost("divide", "l=32,bits=64",
                      lambda c: core.divide(c, c.witness_input("a"), c.witness_input("b"), 32, 64)))
    rows.append(_cost("isqrt", "bits=64", lambda c: core.isqrt(c, c.witness_input("x"), 64)))

    def sgd(c, b, d, variable):
        X = [c.public_input(f"x{k}", d) for k in range(b)]
        Y = c.public_input("y", b)
        a = c.public_input("alpha") if variable else 3
        w = c.witness_input("w", d)
        ml.sgd_linreg_step(c, w, X, Y, a, 16)

    for b in (8, 9):
        rows.append(_cost("sgd_linreg_step", f"b={b},d=13", lambda c, b=b: sgd(c, b, 13, False)))
    rows.append(_cost("sgd_linreg_step", "b=8,d=13,variable_alpha", lambda c: sgd(c, 8, 13, True)))

    def freivald(c, b, n_in, n_out):
        A = [c.witness_input(f"a{k}", n_in) for k in range(b)]
        B = [c.witness_input(f"b{k}", n_out) for k in range(n_in)]
        C = ml.matmul_witness(c, A, B)
        ml.freivald_matmul_check(c, A, B, C, list(range(1, n_out + 1)))

    rows.append(_cost("freivald_layer", "b=8,n_in=20,n_out=16", lambda c: freivald(c, 8, 20, 16)))
    rows.append(_cost("softmax_square", "kappa=2", lambda c: ml.softmax_square(c, c.witness_input("z", 2), 16, 64)))
    rows.append(_cost("closest_distance_check", "k=4",
                      lambda c: ml.closest_distance_check(c, c.witness_input("d", 4), c.witness_input("m"), 64)))
    rows.append(_cost("histogram_sum_check", "bins=27",
                      lambda c: ml.histogram_sum_check(c, c.witness_input("p", 27), c.witness_input("a", 27),
                                                       c.witness_input("r", 27))))
    rows.append(_cost("sigmoid_poly", "l=16", lambda c: ml.sigmoid_poly(c, c.witness_input("x"), "remez", 16)))
    rows.append(_cost("sha256", "512-bit message", lambda c: sha256_digest(c, core.split(c, c.witness_input("m"), 254)
                                                                          + [0, 0] + core.split(c, c.witness_input("n"), 254) + [0, 0])))
    return rows


# -- sigmoid approximations ----------------------------------------------------


def sup_error(variant: str, points: int = 10_001, bound: float = 5.0) -> float:
    xs = np.linspace(-bound, bound, points)
    true = 1.0 / (1.0 + np.exp(-xs))
    if variant == "piecewise":
        approx = np.clip(0.2 * xs + 0.5, 0.0, 1.0)
    else:
        a3, a1, a0 = (float(v) for v in SIGMOID_COEFFS[variant])
        approx = a3 * xs**3 + a1 * xs + a0
    return float(np.max(np.abs(true - approx)))


def margin_data(seed: int, n: int, d: int, l: int) -> Dataset:
    """Binary data centred at the origin so a bias-free linear rule separates it."""
    ds = synth("binary", n, d, seed, l, noise=0.05)
    half = 1 << (l - 1)
    X = [[v - half for v in row] for row in ds.features]
    return Dataset(X, list(ds.labels), l, "margin", "class", 2)


def logreg_accuracy(variant: str, seed: int, n_train: int = 300, n_test: int = 200, d: int = 8,
                    l: int = 16, alpha: str = "4", b: int = 10, epochs: int = 4) -> float:
    ds = margin_data(seed, n_train + n_test, d, l)
    cfg = TrainConfig(alpha=alpha, batch_size=b, frac_bits=l, sigmoid=variant, seed=seed)
    alg = LogReg(cfg, {"d": d})
    st = alg.init_state(seed)
    i = 0
    for e in range(epochs):
        for s in range(steps_per_epoch(n_train, b)):
            i += 1
            idx = batch_indices(seed, e, s, b, n_train)
            st = alg.step(st, [ds.features[k] for k in idx], [ds.labels[k] for k in idx], i).state
    test = range(n_train, n_train + n_test)
    return sum(alg.predict(st, ds.features[k]) == ds.labels[k] for k in test) / n_test


def sigmoid_table(seed: int = 0, seeds: int = 10) -> list[dict]:
    rows = []
    for variant in ("remez", "taylor", "piecewise"):
        accs = [logreg_accuracy(variant, seed + s) for s in range(seeds)]
        rows.append({"variant": variant, "sup_error": f"{sup_error(variant):.4f}",
                     "accuracy_mean": f"{sum(accs) / len(accs):.4f}", "accuracy_min": f"{min(accs):.4f}",
                     "accuracy_max": f"{max(accs):.4f}"})
    return rows


# -- payment costs ---------------------------------------------------------------


def economic_sanity(seed: int = 0, gas: int = 27_265, gas_price_gwei: float = 7.85,
                    usd_per_ether: float = 220.0) -> list[dict]:
    """Cost of the one hash evaluation a redeem needs, at the quoted prices."""
    ether = gas * gas_price_gwei * 1e-9
    return [{"gas": gas, "gas_price_gwei": gas_price_gwei, "ether": f"{ether:.6f}",
             "usd": f"{ether * usd_per_ether:.3f}"}]


def write_csv(rows: list[dict], path=None) -> None:
    """Rows to ``path`` (created with its parent directory) or to stdout."""
    from pathlib import Path

    if path is None:
        fh = sys.stdout
    else:
        Path(path).parent.mkdir(parents=True, exist_ok=True)
        fh = open(path, "w", newline="")
    try:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]))
        w.writeheader()
        w.writerows(rows)
    finally:
        if fh is not sys.stdout:
            fh.close()


EXPERIMENTS = {
    "sampling-curve": sampling_curve,
    "interval-tradeoff": interval_tradeoff,
    "bitlength-accuracy": bitlength_accuracy,
    "gadget-costs": gadget_costs,
    "sigmoid-table": sigmoid_table,
    "economic-sanity": economic_sanity,
}
