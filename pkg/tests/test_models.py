"""Native fixed-point learners against exact-rational and float oracles."""

import math
from collections import Counter
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from veriml.dataio import separated_centers, synth
from veriml.models.base import ModelState, TrainConfig
from veriml.models.kmeans import KMeans
from veriml.models.linear import LinReg, LogReg
from veriml.models.nn import NN
from veriml.models.svm import SVM
from veriml.models.tree import Tree, TreeData
from veriml.prng import PinnedPRNG
from veriml.protocol.task import batch_indices, steps_per_epoch

L = 32


def run_epochs(alg, st, ds, epochs, b, seed=1):
    i = 0
    for e in range(epochs):
        for s in range(steps_per_epoch(ds.n, b)):
            i += 1
            idx = batch_indices(seed, e, s, b, ds.n)
            Y = [ds.labels[k] for k in idx]
            st = alg.step(st, [ds.features[k] for k in idx], Y, i).state
    return st


def rand_batch(seed, b, d, l=L, lo=0.0, hi=1.0):
    rng = PinnedPRNG(seed, "batch")
    X = [[int(rng.uniform(lo, hi) * (1 << l)) for _ in range(d)] for _ in range(b)]
    return X, rng


# -- linear regression ---------------------------------------------------------

@given(st.integers(0, 2**32))
def test_linreg_step_close_to_real_sgd(seed):
    b, d = 4, 3
    X, rng = rand_batch(seed, b, d)
    Y = [int(rng.uniform(-1, 1) * (1 << L)) for _ in range(b)]
    w = [int(rng.uniform(-1, 1) * (1 << L)) for _ in range(d)]
    cfg = TrainConfig(alpha="0.1", batch_size=b, frac_bits=L)
    out = LinReg(cfg, {"d": d}).step(ModelState("linreg", w, L), X, Y, 1).state
    S = 1 << L
    xr = [[Fraction(v, S) for v in row] for row in X]
    wr = [Fraction(v, S) for v in w]
    res = [sum(a * c for a, c in zip(row, wr)) - Fraction(y, S) for row, y in zip(xr, Y)]
    for j in range(d):
        g = sum(r * row[j] for r, row in zip(res, xr))
        want = wr[j] - Fraction(1, 10) / b * g
        # one ulp of flooring plus the rounding of alpha/b to l bits
        assert abs(Fraction(out.params[j], S) - want) <= Fraction(1, S) * (1 + abs(g))


def test_linreg_zero_gradient_keeps_state():
    w = [1 << L, -(1 << L)]
    X = [[1 << L, 1 << L]]  # x . w = 0 = y
    st = LinReg(TrainConfig(batch_size=1), {"d": 2}).step(ModelState("linreg", w, L), X, [0], 1).state
    assert st.params == w


def test_linreg_recovers_planted_weights():
    ds = synth("regression", 128, 3, 4, L, noise=0)
    alg = LinReg(TrainConfig(batch_size=8, frac_bits=L, alpha="0.5"), {"d": 3})
    st = run_epochs(alg, alg.init_state(0), ds, 300, 8)
    assert max(abs(a - b) for a, b in zip(st.floats(), ds.true_weights)) < 2**-8


def test_variable_alpha_schedule():
    cfg = TrainConfig(alpha="0.5", batch_size=2, frac_bits=16, variable_alpha=True, alpha_decay="1")
    assert cfg.alpha_over_b(1) == round(0.25 * 2**16)
    assert cfg.alpha_over_b(3) == round(0.25 / 3 * 2**16)


# -- logistic regression -------------------------------------------------------

def test_logreg_learns_separable_data():
    from veriml.experiments import margin_data

    ds = margin_data(3, 200, 4, 16)
    alg = LogReg(TrainConfig(alpha="4", batch_size=10, frac_bits=16), {"d": 4})
    st = run_epochs(alg, alg.init_state(3), ds, 4, 10)
    acc = sum(alg.predict(st, x) == y for x, y in zip(ds.features, ds.labels)) / ds.n
    assert acc > 0.9


# -- SVM -----------------------------------------------------------------------

def pegasos_oracle(w, X, Y, t, lam, b):
    eta = 1 / (lam * t)
    ys = [1 if y else -1 for y in Y]
    viol = [i for i, x in enumerate(X) if ys[i] * np.dot(x, w) < 1]
    half = (1 - eta * lam) * w + (eta / b) * sum((ys[i] * X[i] for i in viol), np.zeros_like(w))
    n = np.linalg.norm(half)
    return min(1.0, (1 / math.sqrt(lam)) / n) * half if n > 0 else half


@settings(max_examples=25)
@given(st.integers(0, 2**32), st.integers(1, 40))
def test_svm_matches_float_pegasos(seed, t):
    b, d, lam = 4, 3, 0.1
    X, rng = rand_batch(seed, b, d, lo=-1, hi=1)
    Y = [rng.randbelow(2) for _ in range(b)]
    w = [int(rng.uniform(-1, 1) * (1 << L)) for _ in range(d)]
    alg = SVM(TrainConfig(batch_size=b, frac_bits=L, lam=str(lam)), {"d": d})
    out = alg.step(ModelState("svm", w, L), X, Y, t).state
    S = float(1 << L)
    Xf = [np.array(r) / S for r in X]
    want = pegasos_oracle(np.array(w) / S, Xf, Y, t, lam, b)
    assert np.allclose(np.array(out.params) / S, want, atol=1e-6)
    # projection keeps the iterate inside the 1/sqrt(lam) ball
    assert np.linalg.norm(np.array(out.params) / S) <= 1 / math.sqrt(lam) + 1e-6


def test_svm_rejects_t0():
    with pytest.raises(ValueError):
        SVM(TrainConfig(), {"d": 1}).trace([0], [[0]], [1], 0)


# -- K-means ---------------------------------------------------------------------

@given(st.integers(0, 2**32))
def test_kmeans_running_mean(seed):
    k, d, b = 3, 2, 6
    X, rng = rand_batch(seed, b, d)
    cents = [[rng.randrange(0, 1 << L) for _ in range(d)] for _ in range(k)]
    counts = [(1 + rng.randbelow(5)) << L for _ in range(k)]
    alg = KMeans(TrainConfig(batch_size=b, frac_bits=L, k_clusters=k), {"d": d})
    st = ModelState("kmeans", [v for c in cents for v in c] + counts, L)
    out = alg.step(st, X, None, 1).state
    # oracle: nearest (lowest index on ties), then exact mean of old mass + new points
    assign = [min(range(k), key=lambda j: (sum((a - c) ** 2 for a, c in zip(x, cents[j])), j)) for x in X]
    for j in range(k):
        pts = [X[i] for i in range(b) if assign[i] == j]
        n_old = Fraction(counts[j], 1 << L)
        for t in range(d):
            exact = (n_old * cents[j][t] + sum(p[t] for p in pts)) / (n_old + len(pts))
            assert out.params[j * d + t] == math.floor(exact)
        assert out.params[k * d + j] == counts[j] + (len(pts) << L)


@pytest.mark.parametrize("seed", range(4))
def test_kmeans_purity_on_separated_blobs(seed):
    k, d = 4, 3
    cen = separated_centers(k, d, seed, 0.3)
    ds = synth("blobs", 200, d, seed, L, k=k, centers=cen, sigma=0.02)  # gap >= 15 sigma
    alg = KMeans(TrainConfig(batch_size=8, frac_bits=L, k_clusters=k), {"d": d})
    st = run_epochs(alg, alg.init_state(seed, ds), ds, 1, 8, seed)
    groups = {}
    for x, y in zip(ds.features, ds.labels):
        groups.setdefault(alg.predict(st, x), []).append(y)
    purity = sum(Counter(g).most_common(1)[0][1] for g in groups.values()) / ds.n
    assert purity >= 0.99


# -- neural network --------------------------------------------------------------

def float_grads(Ws, X, Y, kappa):
    """Square activation, squared-softmax head, plain float backprop."""
    acts, zs = [X], []
    A = X
    for k, W in enumerate(Ws):
        Z = A @ W
        zs.append(Z)
        A = Z * Z if k < len(Ws) - 1 else Z
        if k < len(Ws) - 1:
            acts.append(A)
    Zl = zs[-1]
    sq = Zl * Zl
    P = sq / sq.sum(axis=1, keepdims=True)
    delta = P - np.eye(kappa)[Y]
    grads = [None] * len(Ws)
    for k in range(len(Ws) - 1, -1, -1):
        grads[k] = acts[k].T @ delta
        if k > 0:
            delta = (delta @ Ws[k].T) * (2 * zs[k - 1])
    return grads


@settings(max_examples=10)
@given(st.integers(0, 2**32))
def test_nn_gradients_match_float(seed):
    layers = [3, 4, 2]
    alg = NN(TrainConfig(batch_size=4, frac_bits=L, nn_layers=(4,)), {"layers": layers})
    X, rng = rand_batch(seed, 4, 3)
    Y = [rng.randbelow(2) for _ in range(4)]
    state = alg.init_state(seed)
    g = alg.gradients(state, X, Y)
    S = float(1 << L)
    Ws = [np.array(W, dtype=float) / S for W in alg.unpack(state.params)]
    want = np.concatenate([gk.ravel() for gk in float_grads(Ws, np.array(X) / S, Y, 2)])
    assert np.allclose(np.array(g) / S**2, want, atol=1e-5)


def test_nn_param_count_and_shapes():
    alg = NN(TrainConfig(nn_layers=(16, 16)), {"layers": [20, 16, 16, 2]})
    assert alg.param_count() == 20 * 16 + 16 * 16 + 16 * 2
    st = alg.init_state(0)
    assert [len(W) for W in alg.unpack(st.params)] == [20, 16, 16]


# -- tree ------------------------------------------------------------------------

def weighted_gini(nl, nr):
    L_, R_ = sum(nl), sum(nr)
    N = L_ + R_
    g = lambda v, n: 1 - sum(Fraction(x, n) ** 2 for x in v)  # noqa: E731
    return Fraction(L_, N) * g(nl, L_) + Fraction(R_, N) * g(nr, R_)


@given(st.lists(st.tuples(st.integers(0, 1), st.integers(0, 2), st.integers(0, 2), st.integers(0, 2)),
                min_size=1, max_size=30))
def test_tree_split_minimises_gini(rows):
    alg = Tree(TrainConfig(frac_bits=4, n_classes=2, k_bins=3), {"d": 3})
    data = TreeData([list(r[1:]) for r in rows], [r[0] for r in rows])
    H = alg.histogram(data, range(len(rows)))
    dec = alg.decide(H)
    cands = alg.candidates(H)
    valid = [j for j, (nl, nr) in enumerate(cands) if sum(nl) and sum(nr)]
    if alg.is_pure(alg.class_totals(H)) or not valid:
        assert dec.leaf
        return
    best = min(weighted_gini(*cands[j]) for j in valid)
    j = dec.feature * (alg.k_bins - 1) + dec.threshold
    assert weighted_gini(*cands[j]) == best


def test_tree_children_partition_parent():
    ds = synth("multiclass", 80, 3, 2, 8, k=2)
    from veriml.dataio import bucketize

    hs = bucketize(ds, 3)
    data = TreeData(hs.bins, list(ds.labels))
    alg = Tree(TrainConfig(frac_bits=8, max_depth=3, n_classes=2, k_bins=3), {"d": 3})
    states = {0: alg.init_state(0, data)}
    for i in range(1, alg.n_nodes + 1):
        states[i] = alg.step(states[alg.prev(i)], None, None, i, data).state
        parent = alg.half(states[alg.prev(i)], i)
        h = alg.hist_len
        kids = states[i].params
        assert [a + b for a, b in zip(kids[:h], kids[h:])] == parent
    model = alg.final_model(states)
    acc = sum(alg.predict(model, x) == y for x, y in zip(data.bins, data.labels)) / len(data.labels)
    assert acc > 0.5


def test_tree_entropy_native_only():
    alg = Tree(TrainConfig(frac_bits=4, n_classes=2, k_bins=2, criterion="entropy"), {"d": 1})
    H = [3 << 4, 0, 0, 3 << 4]  # class 0 all in bin 0, class 1 all in bin 1
    dec = alg.decide(H)
    assert not dec.leaf and dec.threshold == 0
