"""One R1CS circuit per task proving a single training iteration.

Layout (public wires first, in this order):

    public inputs   nonce_prev bits (254), nonce_cur bits (254), algorithm inputs
    public outputs  id_prev (8 words), id_cur (8 words)
    witness inputs  P_prev, w_in, algorithm extras

The circuit hashes ``P_prev`` with ``nonce_prev`` and binds the digest to
``id_prev``; checks that ``w_in`` is the truncation of the state behind
``P_prev`` (input authenticity); runs the algorithm's step on ``w_in`` to get
the untruncated output ``f`` at scale ``2^(4l)``; and binds
``SHA-256(LE32(sum_j v_j f_j) || LE32(nonce_cur))`` to ``id_cur``.

The step bodies mirror ``veriml.models`` operation for operation, so the
native identifiers computed during training equal the circuit outputs.
"""

from __future__ import annotations

from typing import Sequence

from ..commitment import NONCE_BITS, authenticity_tolerance, gen_coefficients
from ..approx import CLAMP, coeffs_raw
from ..gadgets.core import (
    assert_abs_below,
    clamp_flags,
    compare_leq,
    divide,
    hint,
    is_zero,
    isqrt,
    select,
    split,
    truncate,
)
from ..gadgets.ml import (
    argmin_onehot,
    freivald_matmul_check,
    histogram_sum_check,
    matmul_witness,
    sgd_linreg_step,
    sigmoid_poly,
    softmax_square,
)
from ..gadgets.sha256 import bind_digest, sha256_digest
from ..models.base import ModelState
from ..prng import PinnedPRNG
from ..r1cs import LC, Circuit, as_lc, lc_sum
from .task import TaskSpec

P_BITS = 254


def int_bits(v: int, n: int = NONCE_BITS) -> list[int]:
    return [(v >> k) & 1 for k in range(n)]


class StepCircuit:
    """Algorithm body of the iteration circuit plus its input builders."""

    kind = "base"

    def __init__(self, spec: TaskSpec, freivald_seed: int = 0):
        self.spec = spec
        self.cfg = spec.cfg
        self.alg = spec.algorithm()
        self.l = spec.cfg.frac_bits
        self.B = spec.cfg.int_budget + self.l  # honest |value| < 2^B at scale 2^l
        self.freivald_seed = freivald_seed
        self.pub: dict = {}
        self.ext: dict = {}

    # allocation happens in two passes because public wires precede witnesses
    def declare_public(self, c: Circuit) -> None:
        pass

    def declare_witness(self, c: Circuit) -> None:
        pass

    def body(self, c: Circuit, w: list[LC]) -> list[LC]:
        raise NotImplementedError

    def public_values(self, i: int, X, Y, data=None) -> dict:
        return {}

    def witness_values(self, i: int, prev: ModelState, X, Y, data=None) -> dict:
        return {}

    def _batch_inputs(self, c: Circuit, y_width: int | None = None) -> None:
        b, d = self.cfg.batch_size, self.spec.dims["d"]
        self.pub["X"] = c.public_input("X", b * d)
        self.pub["Y"] = c.public_input("Y", b * (y_width or 1))

    def _rows(self, flat: list[LC], width: int) -> list[list[LC]]:
        return [flat[r * width : (r + 1) * width] for r in range(len(flat) // width)]


class LinRegCircuit(StepCircuit):
    kind = "linreg"

    def declare_public(self, c):
        self._batch_inputs(c)
        if self.cfg.variable_alpha:
            self.pub["alpha"] = c.public_input("alpha")

    def body(self, c, w):
        X = self._rows(self.pub["X"], len(w))
        a = self.pub["alpha"] if self.cfg.variable_alpha else self.cfg.alpha_over_b()
        _, full = sgd_linreg_step(c, w, X, self.pub["Y"], a, self.l)
        return full

    def public_values(self, i, X, Y, data=None):
        out = {"X": [v for row in X for v in row], "Y": list(Y)}
        if self.cfg.variable_alpha:
            out["alpha"] = self.cfg.alpha_over_b(i)
        return out


class LogRegCircuit(LinRegCircuit):
    kind = "logreg"

    def body(self, c, w):
        if self.cfg.sigmoid not in ("remez", "taylor"):
            raise ValueError(f"sigmoid {self.cfg.sigmoid!r} has no circuit; use remez or taylor")
        l, d = self.l, len(w)
        X = self._rows(self.pub["X"], d)
        a = self.pub["alpha"] if self.cfg.variable_alpha else self.cfg.alpha_over_b()
        bits = 2 * self.B + d.bit_length() + 1
        lim = CLAMP << l
        errs = []
        for row, y in zip(X, self.pub["Y"]):
            z = truncate(c, lc_sum(c.mul(x, wj) for x, wj in zip(row, w)), l)
            zc, _, _ = clamp_flags(c, z, -lim, lim, bits)
            s, _ = sigmoid_poly(c, zc, self.cfg.sigmoid, l)
            errs.append(s - as_lc(y) * (1 << l))
        full = []
        for j in range(d):
            g = lc_sum(c.mul(e, row[j]) for e, row in zip(errs, X))
            f3 = as_lc(w[j]) * (1 << 2 * l) - c.mul(a, g)
            truncate(c, f3, 2 * l)
            full.append(f3 * (1 << l))
        return full


class SVMCircuit(StepCircuit):
    kind = "svm"

    def declare_public(self, c):
        self._batch_inputs(c)
        self.pub["t"] = c.public_input("t")

    def body(self, c, w):
        l, d, B = self.l, len(w), self.B
        alg = self.alg
        lam, inv_b = alg.lam_raw, alg.inv_b
        X = self._rows(self.pub["X"], d)
        t = self.pub["t"]
        # eta = floor(2^(2l) / (lam t)): 2^(2l) = (lam t) eta + r, 0 <= r < lam t
        eta = divide(c, LC.const(1 << 2 * l), t * lam, 0, B + 24)
        mbits = 2 * B + d.bit_length() + 2
        fy = []
        for row, y in zip(X, self.pub["Y"]):
            ys = as_lc(y) * 2 - 1
            margin = c.mul(ys, lc_sum(c.mul(x, wj) for x, wj in zip(row, w)))
            flag = 1 - compare_leq(c, 1 << 2 * l, margin, mbits)
            fy.append(c.mul(flag, ys))
        keep = LC.const(1 << 2 * l) - eta * lam
        half = []
        for j in range(d):
            S = lc_sum(c.mul(f, row[j]) for f, row in zip(fy, X))
            hf = c.mul(keep, w[j]) + c.mul(eta, S) * inv_b
            half.append(truncate(c, hf, 2 * l))
        ln = lc_sum(c.mul(h, h) for h in half) * lam
        nbits = 2 * B + l + d.bit_length() + 2
        proj = 1 - compare_leq(c, ln, 1 << 3 * l, nbits)
        q = truncate(c, ln, l)
        s = isqrt(c, q, nbits)
        divisor = select(c, proj, s, LC.const(1 << l))
        phi = divide(c, LC.const(1 << 2 * l), divisor, 0, nbits)
        return [c.mul(phi, h) * (1 << 2 * l) for h in half]

    def public_values(self, i, X, Y, data=None):
        return {"X": [v for row in X for v in row], "Y": list(Y), "t": i}


class KMeansCircuit(StepCircuit):
    kind = "kmeans"

    def declare_public(self, c):
        b, d = self.cfg.batch_size, self.spec.dims["d"]
        self.pub["X"] = c.public_input("X", b * d)

    def body(self, c, w):
        l, B = self.l, self.B
        d, k = self.spec.dims["d"], self.cfg.k_clusters
        X = self._rows(self.pub["X"], d)
        cents = self._rows(w[: k * d], d)
        counts = w[k * d :]
        dbits = 2 * B + d.bit_length() + 4
        sels = []
        for x in X:
            dists = []
            for cen in cents:
                diffs = [as_lc(a) - as_lc(b) for a, b in zip(x, cen)]
                dists.append(lc_sum(c.mul(e, e) for e in diffs))
            sels.append(argmin_onehot(c, dists, dbits)[1])
        new_c, new_n = [], []
        for j in range(k):
            cnt = lc_sum(sel[j] for sel in sels)
            n_new = as_lc(counts[j]) + cnt * (1 << l)
            for t in range(d):
                s = lc_sum(c.mul(sel[j], x[t]) for sel, x in zip(sels, X))
                num = c.mul(counts[j], cents[j][t]) + s * (1 << l)
                new_c.append(divide(c, num, n_new, 0, B + 8))
            new_n.append(n_new)
        return [as_lc(v) * (1 << 3 * l) for v in new_c + new_n]

    def public_values(self, i, X, Y, data=None):
        return {"X": [v for row in X for v in row]}


class NNCircuit(StepCircuit):
    kind = "nn"

    def __init__(self, spec, freivald_seed=0):
        super().__init__(spec, freivald_seed)
        self.rng = PinnedPRNG(freivald_seed, "freivald")
        self.layers = tuple(spec.dims["layers"])
        self.output = spec.dims.get("output", "softmax")
        self.n_matmul = 0

    def declare_public(self, c):
        b, L = self.cfg.batch_size, self.layers
        self.pub["X"] = c.public_input("X", b * L[0])
        self.pub["Y"] = c.public_input("Y", b * (L[-1] if self.output == "softmax" else 1))
        if self.cfg.variable_alpha:
            self.pub["alpha"] = c.public_input("alpha")

    def fmatmul(self, c, A, Bm):
        """A @ B as witness wires checked with Freivald's test (r drawn at build time)."""
        C = matmul_witness(c, A, Bm)
        r = [self.rng.randbelow(c.p) for _ in range(len(Bm[0]))]
        freivald_matmul_check(c, A, Bm, C, r)
        self.n_matmul += 1
        return C

    def _trunc(self, c, M, s):
        return [[truncate(c, v, s) for v in row] for row in M]

    def activate(self, c, Z):
        l = self.l
        if self.cfg.activation == "square":
            A = [[truncate(c, c.mul(z, z), l) for z in row] for row in Z]
            D = [[z * 2 for z in row] for row in Z]
            return A, D
        if self.cfg.activation != "remez":
            raise ValueError(f"unknown activation {self.cfg.activation!r}")
        a3, a1, _ = coeffs_raw("remez", l)
        lim = CLAMP << l
        bits = 2 * self.B + max(self.layers).bit_length() + 2
        A, D = [], []
        for row in Z:
            ar, dr = [], []
            for z in row:
                zc, below, above = clamp_flags(c, z, -lim, lim, bits)
                s, zc2 = sigmoid_poly(c, zc, "remez", l)
                deriv = truncate(c, zc2 * (3 * a3) + (a1 << 2 * l), 2 * l)
                ar.append(s)
                dr.append(c.mul(1 - below - above, deriv))
            A.append(ar)
            D.append(dr)
        return A, D

    def body(self, c, w):
        l, L = self.l, self.layers
        Ws, pos = [], 0
        for k in range(len(L) - 1):
            Ws.append(self._rows(w[pos : pos + L[k] * L[k + 1]], L[k + 1]))
            pos += L[k] * L[k + 1]
        A = self._rows(self.pub["X"], L[0])
        acts, derivs = [A], []
        for k, W in enumerate(Ws):
            Z = self._trunc(c, self.fmatmul(c, A, W), l)
            if k < len(Ws) - 1:
                A, D = self.activate(c, Z)
                acts.append(A)
                derivs.append(D)
        if self.output == "softmax":
            kappa = L[-1]
            pbits = 2 * self.B + kappa.bit_length() + 2
            onehot = self._rows(self.pub["Y"], kappa)
            delta = [[p - as_lc(y) * (1 << l) for p, y in zip(softmax_square(c, row, l, pbits), yr)]
                     for row, yr in zip(Z, onehot)]
        else:
            delta = [[z - as_lc(y) for z in row] for row, y in zip(Z, self.pub["Y"])]
        grads = [None] * len(Ws)
        for k in range(len(Ws) - 1, -1, -1):
            grads[k] = self.fmatmul(c, _t(acts[k]), delta)
            if k > 0:
                E = self._trunc(c, self.fmatmul(c, delta, _t(Ws[k])), l)
                delta = [[truncate(c, c.mul(e, dv), l) for e, dv in zip(er, dr)]
                         for er, dr in zip(E, derivs[k - 1])]
        a = self.pub["alpha"] if self.cfg.variable_alpha else self.cfg.alpha_over_b()
        full = []
        for W, G in zip(Ws, grads):
            for wr, gr in zip(W, G):
                for wv, gv in zip(wr, gr):
                    f3 = as_lc(wv) * (1 << 2 * l) - c.mul(a, gv)
                    truncate(c, f3, 2 * l)
                    full.append(f3 * (1 << l))
        return full

    def public_values(self, i, X, Y, data=None):
        if self.output == "softmax":
            kappa = self.layers[-1]
            ys = [1 if j == y else 0 for y in Y for j in range(kappa)]
        else:
            ys = list(Y)
        out = {"X": [v for row in X for v in row], "Y": ys}
        if self.cfg.variable_alpha:
            out["alpha"] = self.cfg.alpha_over_b(i)
        return out


def _t(M):
    return [list(r) for r in zip(*M)]


class TreeCircuit(StepCircuit):
    """Split selection for one node; children histograms are witnesses.

    Checks: children sum to the parent; the chosen split maximises the Gini
    score among valid candidates; bins on the wrong side of the chosen
    threshold are empty in each child; leaves pass the parent through.
    """

    kind = "tree"

    def declare_public(self, c):
        self.pub["half"] = c.public_input("half")

    def declare_witness(self, c):
        self.ext["children"] = c.witness_input("children", 2 * self.alg.hist_len)

    def body(self, c, w):
        if self.cfg.criterion != "gini":
            raise ValueError("only the Gini criterion has a circuit")
        alg, l, B = self.alg, self.l, self.B
        h, kappa, d, kb = alg.hist_len, alg.kappa, alg.d, alg.k_bins
        half = self.pub["half"]
        H = [select(c, half, w[h + j], w[j]) for j in range(h)]
        left, right = self.ext["children"][:h], self.ext["children"][h:]
        ix = alg.idx

        for v in left + right:
            split(c, v, B)
        histogram_sum_check(c, H, left, right)
        totals = [lc_sum(H[ix(cl, 0, b)] for b in range(kb)) for cl in range(kappa)]
        for hist in (H, left):
            for cl in range(kappa):
                t0 = lc_sum(hist[ix(cl, 0, b)] for b in range(kb))
                for f in range(1, d):
                    c.enforce(lc_sum(hist[ix(cl, f, b)] for b in range(kb)) - t0, 1, 0)

        nums, dens, valid = [], [], []
        for f in range(d):
            for t in range(kb - 1):
                nl = [lc_sum(H[ix(cl, f, b)] for b in range(t + 1)) for cl in range(kappa)]
                nr = [tc - a for tc, a in zip(totals, nl)]
                Lc, Rc = lc_sum(nl), lc_sum(nr)
                A = lc_sum(c.mul(v, v) for v in nl)
                Bs = lc_sum(c.mul(v, v) for v in nr)
                nums.append(c.mul(A, Rc) + c.mul(Bs, Lc))
                den = c.mul(Lc, Rc)
                dens.append(den)
                valid.append(1 - is_zero(c, den))
        ncand = len(nums)

        nz = lc_sum(1 - is_zero(c, tc) for tc in totals)
        pure = is_zero(c, c.mul(nz, nz - 1))
        novalid = is_zero(c, lc_sum(valid))
        leaf = pure + novalid - c.mul(pure, novalid)

        def best(z):
            if z.eval(leaf):
                return -1
            dec = alg.decide([z.eval(v) for v in H])
            return -1 if dec.leaf else dec.feature * (kb - 1) + dec.threshold

        sel = []
        for j in range(ncand):
            s = hint(c, lambda z, j=j: 1 if best(z) == j else 0)
            c.enforce(s, s - 1, 0)
            sel.append(s)
        c.enforce(lc_sum(sel), 1, 1 - leaf)
        num_s = lc_sum(c.mul(s, n) for s, n in zip(sel, nums))
        den_s = lc_sum(c.mul(s, dn) for s, dn in zip(sel, dens))
        inv = hint(c, lambda z: pow(z.eval(den_s), -1, c.p) if z.eval(den_s) % c.p else 0)
        c.enforce(den_s, inv, 1 - leaf)
        obits = 5 * B + (2 * kappa).bit_length() + 1
        if obits >= c.field.bits - 1:
            raise ValueError(f"tree split comparison needs {obits} bits; field too small")
        for n, dn in zip(nums, dens):
            split(c, c.mul(num_s, dn) - c.mul(n, den_s), obits)

        for f in range(d):
            fs = sel[f * (kb - 1) : (f + 1) * (kb - 1)]
            for b in range(kb):
                rmask = lc_sum(fs[:b])  # chosen threshold < b: bin goes right
                lmask = lc_sum(fs[b:])  # chosen threshold >= b: bin goes left
                for cl in range(kappa):
                    j = ix(cl, f, b)
                    if b > 0:
                        c.enforce(left[j], rmask, 0)
                    if b < kb - 1:
                        c.enforce(right[j], lmask, 0)
        for v in right:
            c.enforce(v, leaf, 0)
        return [as_lc(v) * (1 << 3 * l) for v in left + right]

    def public_values(self, i, X, Y, data=None):
        return {"half": i % 2}

    def witness_values(self, i, prev, X, Y, data=None):
        return {"children": self.alg.step(prev, X, Y, i, data).state.params}


STEP_CIRCUITS = {cls.kind: cls for cls in (LinRegCircuit, LogRegCircuit, SVMCircuit, KMeansCircuit,
                                           NNCircuit, TreeCircuit)}


class IterationCircuit:
    def __init__(self, spec: TaskSpec, freivald_seed: int = 0):
        self.spec = spec
        self.step = STEP_CIRCUITS[spec.kind](spec, freivald_seed)
        self.l = spec.cfg.frac_bits
        self.D = self.step.alg.param_count()
        self.v = gen_coefficients(spec.client_seed, self.D, self.l, spec.cfg.int_budget)
        self.circuit = self._build()

    def _build(self) -> Circuit:
        spec, l, v = self.spec, self.l, self.v
        c = Circuit(spec.field_cfg, f"{spec.kind}-iteration")
        n_prev = c.public_input("nonce_prev", NONCE_BITS)
        n_cur = c.public_input("nonce_cur", NONCE_BITS)
        self.step.declare_public(c)
        id_prev = c.public_output("id_prev", 8)
        id_cur = c.public_output("id_cur", 8)
        P_prev = c.witness_input("P_prev")
        w_in = c.witness_input("w_in", self.D)
        self.step.declare_witness(c)

        pad = [0] * (256 - NONCE_BITS)
        bind_digest(c, sha256_digest(c, split(c, P_prev, P_BITS) + pad + n_prev + pad), id_prev)

        # input authenticity: P_prev - <w_in, v> 2^(3l) within the truncation tolerance
        B = spec.cfg.int_budget + l
        for x in w_in:
            split(c, x + (1 << B), B + 1)
        diff = P_prev - lc_sum(x * (vj << 3 * l) for x, vj in zip(w_in, v))
        tol = authenticity_tolerance(v, l, self.D, spec.strict_authenticity)
        if spec.strict_authenticity:
            split(c, diff, tol.bit_length())
            split(c, tol - 1 - diff, tol.bit_length())
        else:
            assert_abs_below(c, diff, tol)

        full = self.step.body(c, w_in)
        P_cur = lc_sum(as_lc(f) * vj for f, vj in zip(full, v))
        bind_digest(c, sha256_digest(c, split(c, P_cur, P_BITS) + pad + n_cur + pad), id_cur)
        return c.freeze()

    # -- inputs ---------------------------------------------------------------
    def public_io(self, i: int, nonce_prev: int, nonce_cur: int, id_prev: bytes, id_cur: bytes,
                  X, Y, data=None) -> dict:
        from ..gadgets.sha256 import digest_words

        io = {"nonce_prev": int_bits(nonce_prev), "nonce_cur": int_bits(nonce_cur),
              "id_prev": digest_words(id_prev), "id_cur": digest_words(id_cur)}
        io.update(self.step.public_values(i, X, Y, data))
        return io

    def inputs(self, i: int, nonce_prev: int, nonce_cur: int, P_prev: int, w_in: ModelState,
               X, Y, data=None) -> tuple[dict, dict]:
        """(public inputs, witness inputs) for the prover; outputs are solved."""
        pub = {"nonce_prev": int_bits(nonce_prev), "nonce_cur": int_bits(nonce_cur)}
        pub.update(self.step.public_values(i, X, Y, data))
        wit = {"P_prev": P_prev, "w_in": list(w_in.params)}
        wit.update(self.step.witness_values(i, w_in, X, Y, data))
        return pub, wit

    def output_words(self, z) -> tuple[list[int], list[int]]:
        c = self.circuit
        get = lambda name: [z[i] % (1 << 32) for i in c.inputs[name]]  # noqa: E731
        return get("id_prev"), get("id_cur")


_CACHE: dict = {}


def iteration_circuit(spec: TaskSpec, freivald_seed: int = 0) -> IterationCircuit:
    key = (spec.digest(), freivald_seed)
    if key not in _CACHE:
        if len(_CACHE) >= 8:
            _CACHE.pop(next(iter(_CACHE)))
        _CACHE[key] = IterationCircuit(spec, freivald_seed)
    return _CACHE[key]


def words_to_bytes(words: Sequence[int]) -> bytes:
    return b"".join(int(w).to_bytes(4, "big") for w in words)
