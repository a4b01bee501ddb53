"""Learning-specific gadgets built on the core arithmetic checks."""

from __future__ import annotations

from typing import Sequence

from ..approx import coeffs_raw
from ..r1cs import LC, Assignment, Circuit, LCLike, as_lc, lc_sum
from .core import division_check, hint, is_zero, split, truncate


def sgd_linreg_step(
    c: Circuit,
    w: Sequence[LCLike],
    X: Sequence[Sequence[LCLike]],
    Y: Sequence[LCLike],
    alpha_over_b: LCLike,
    l: int,
) -> tuple[list[LC], list[LC]]:
    """One SGD step for least squares; returns (truncated w', untruncated w' at 2^(4l)).

    Costs 2*d*b multiplications (plus d more when ``alpha_over_b`` is a wire)
    and d truncation checks of 3l bits.
    """
    d = len(w)
    if any(len(row) != d for row in X) or len(X) != len(Y):
        raise ValueError("batch shape mismatch")
    res = []
    for row, y in zip(X, Y):
        pred = lc_sum(c.mul(x, wj) for x, wj in zip(row, w))
        res.append(pred - as_lc(y) * (1 << l))
    full, new = [], []
    for j in range(d):
        g = lc_sum(c.mul(r, row[j]) for r, row in zip(res, X))
        f = as_lc(w[j]) * (1 << 3 * l) - c.mul(alpha_over_b, g)
        full.append(f)
        new.append(truncate(c, f, 3 * l))
    return new, full


def mse(c: Circuit, w: Sequence[LCLike], X, Y, l: int) -> LC:
    """(1/b) * sum (x.w - y)^2 at scale 2^l; b must be a power of two."""
    b = len(X)
    if b & (b - 1):
        raise ValueError("in-circuit MSE needs a power-of-two batch size")
    total = LC()
    for row, y in zip(X, Y):
        r = lc_sum(c.mul(x, wj) for x, wj in zip(row, w)) - as_lc(y) * (1 << l)
        total = total + c.mul(r, r)
    # 2^(4l) -> 2^l, with the 1/b folded into the same shift
    return truncate(c, total, 3 * l + (b.bit_length() - 1))


def sigmoid_poly(c: Circuit, x: LCLike, variant: str, l: int) -> tuple[LC, LC]:
    """Cubic sigmoid at scale 2^l; also returns x^2 (scale 2^(2l)) for reuse."""
    a3, a1, a0 = coeffs_raw(variant, l)
    x = as_lc(x)
    x2 = c.mul(x, x)
    x3 = c.mul(x, x2)
    full = x3 * a3 + x * (a1 << 2 * l) + (a0 << 3 * l)
    return truncate(c, full, 3 * l), x2


def matmul_witness(c: Circuit, A: Sequence[Sequence[LCLike]], B: Sequence[Sequence[LCLike]]) -> list[list[LC]]:
    """Unconstrained witness wires holding A @ B (pair with freivald_matmul_check)."""
    n, m, q = len(A), len(B), len(B[0])
    idx = [[c.new_wire().index for _ in range(q)] for _ in range(n)]
    A = [[as_lc(a) for a in row] for row in A]
    B = [[as_lc(b) for b in row] for row in B]

    def solve(z: Assignment):
        av = [[z.eval(a) for a in row] for row in A]
        bcols = [[z.eval(B[k][j]) for k in range(m)] for j in range(q)]
        for i in range(n):
            ai = av[i]
            for j in range(q):
                z[idx[i][j]] = sum(x * y for x, y in zip(ai, bcols[j]))

    c.solver(solve)
    return [[LC.wire(i) for i in row] for row in idx]


def freivald_matmul_check(
    c: Circuit,
    A: Sequence[Sequence[LCLike]],
    B: Sequence[Sequence[LCLike]],
    C: Sequence[Sequence[LCLike]],
    r: Sequence[int],
) -> None:
    """Enforce A (B r) = C r with r baked in as constants: n*m multiplications."""
    n, m, q = len(A), len(B), len(r)
    if any(len(row) != m for row in A) or any(len(row) != q for row in B) or len(C) != n:
        raise ValueError("matrix shapes do not line up")
    Br = [lc_sum(as_lc(B[k][j]) * r[j] for j in range(q)) for k in range(m)]
    for i in range(n):
        Cr = lc_sum(as_lc(C[i][j]) * r[j] for j in range(q))
        acc = LC()
        for k in range(m - 1):
            acc = acc + c.mul(A[i][k], Br[k])
        # the row equality rides on the last product
        last, blast = as_lc(A[i][m - 1]), Br[m - 1]
        if last.is_const() or blast.is_const():
            c.enforce(acc + c.mul(last, blast) - Cr, 1, 0)
        else:
            c.enforce(last, blast, Cr - acc)


def softmax_square(c: Circuit, logits: Sequence[LCLike], l: int, bits: int) -> list[LC]:
    """probs_i = floor(z_i^2 * 2^l / S) with S = sum z_j^2 (S := 1 when all logits vanish)."""
    sq = [c.mul(z, z) for z in logits]
    S = lc_sum(sq)
    S = S + is_zero(c, S)
    probs = []
    for s in sq:
        p = hint(c, lambda z, s=s: (z.eval(s) << l) // z.eval(S))
        division_check(c, s, S, p, l, bits)
        probs.append(p)
    return probs


def softmax_square_check(c: Circuit, logits, probs, l: int, bits: int) -> None:
    sq = [c.mul(z, z) for z in logits]
    S = lc_sum(sq)
    S = S + is_zero(c, S)
    for s, p in zip(sq, probs):
        division_check(c, s, S, p, l, bits)


def closest_distance_check(
    c: Circuit, distances: Sequence[LCLike], candidate: LCLike, bits: int, strict: bool = True
) -> list[LC]:
    """candidate <= d_j for all j and candidate equals some d_j; returns the equality flags.

    ``strict`` requires exactly one equal distance; otherwise at least one.
    """
    candidate = as_lc(candidate)
    flags = []
    for d in distances:
        split(c, as_lc(d) - candidate, bits)
        flags.append(is_zero(c, as_lc(d) - candidate))
    total = lc_sum(flags)
    if strict:
        c.enforce(total - 1, 1, 0)
    else:
        split(c, total - 1, max(len(flags).bit_length(), 1))
    return flags


def argmin_onehot(c: Circuit, distances: Sequence[LCLike], bits: int) -> tuple[LC, list[LC]]:
    """Minimum distance and a one-hot selector of its lowest index (ties allowed)."""
    distances = [as_lc(d) for d in distances]
    cand = hint(c, lambda z: min(z.eval(d) for d in distances))
    flags = closest_distance_check(c, distances, cand, bits, strict=False)
    sel, rest = [], as_lc(1)
    for f in flags:
        s = c.mul(rest, f)
        sel.append(s)
        rest = rest - s
    return cand, sel


def histogram_sum_check(c: Circuit, parent, left, right) -> None:
    if not len(parent) == len(left) == len(right):
        raise ValueError("histogram layouts differ")
    for p, a, b in zip(parent, left, right):
        c.enforce(as_lc(p) - as_lc(a) - as_lc(b), 1, 0)
