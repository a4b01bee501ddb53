"""Arithmetic building blocks: bit splits, comparisons, truncation and inversion checks.

Costs (raw constraints; the nominal accounting adds 1 per split):

=====================  ==========================
split(bits)            bits + 1
compare_leq(bits)      bits + 2
truncation_check(s)    s + 1
inner_product(n)       n  (0 if either side is constant)
is_zero                2
division_check         1 + 2 * (bits + 1)
sqrt_check             1 + 2 * (bits + 1)
=====================  ==========================
"""

from __future__ import annotations

from typing import Callable, Sequence

from ..r1cs import LC, Assignment, Circuit, LCLike, as_lc, lc_sum


def hint(c: Circuit, fn: Callable[[Assignment], int]) -> LC:
    """Unconstrained witness wire computed by ``fn``; callers must constrain it."""
    out = c.new_wire().index

    def solve(z: Assignment):
        z[out] = fn(z)

    c.solver(solve)
    return LC.wire(out)


def split(c: Circuit, x: LCLike, bits: int) -> list[LC]:
    """Little-endian bit decomposition of ``x``; unsatisfiable unless 0 <= x < 2^bits."""
    if bits < 1:
        raise ValueError("bits must be positive")
    x = as_lc(x)
    idx = [c.new_wire().index for _ in range(bits)]
    mask = (1 << bits) - 1
    p = c.p

    def solve(z: Assignment):
        # canonical representative, so a 254-bit split of any field element is exact
        z.set_bits(idx, (z.eval(x) % p) & mask)

    c.solver(solve)
    for i in idx:
        b = LC.wire(i)
        c.enforce(b, b - 1, 0)
    c.enforce(LC({i: 1 << k for k, i in enumerate(idx)}) - x, 1, 0)
    c.split_surcharge += 1
    return [LC.wire(i) for i in idx]


def range_check(c: Circuit, x: LCLike, bits: int) -> None:
    split(c, x, bits)


def compare_leq(c: Circuit, a: LCLike, b: LCLike, bits: int) -> LC:
    """Boolean wire equal to 1 iff a <= b, read off the top bit of b - a + 2^bits.

    Requires |b - a| < 2^bits.
    """
    shifted = as_lc(b) - as_lc(a) + (1 << bits)
    return split(c, shifted, bits + 1)[bits]


def assert_leq(c: Circuit, a: LCLike, b: LCLike, bits: int) -> None:
    """Enforce a <= b given 0 <= b - a < 2^bits for honest inputs."""
    split(c, as_lc(b) - as_lc(a), bits)


def assert_abs_below(c: Circuit, x: LCLike, bound: int, bits: int | None = None) -> None:
    """Enforce -bound < x < bound with two range checks."""
    x = as_lc(x)
    bits = bits or (2 * bound).bit_length()
    split(c, x + (bound - 1), bits)
    split(c, (bound - 1) - x, bits)


def truncation_check(c: Circuit, full: LCLike, truncated: LCLike, shift: int) -> None:
    """Enforce full = truncated * 2^shift + r with 0 <= r < 2^shift."""
    r = as_lc(full) - as_lc(truncated) * (1 << shift)
    if shift == 0:
        c.enforce(r, 1, 0)
        return
    split(c, r, shift)


def truncate(c: Circuit, full: LCLike, shift: int) -> LC:
    """Floor-shifted copy of ``full`` with its truncation check."""
    full = as_lc(full)
    if shift == 0:
        return full
    t = hint(c, lambda z: z.eval(full) >> shift)
    truncation_check(c, full, t, shift)
    return t


def inner_product(c: Circuit, x: Sequence[LCLike], y: Sequence[LCLike]) -> LC:
    if len(x) != len(y):
        raise ValueError(f"length mismatch: {len(x)} vs {len(y)}")
    return lc_sum(c.mul(a, b) for a, b in zip(x, y))


def is_zero(c: Circuit, x: LCLike) -> LC:
    """Flag = 1 iff x == 0, via an inverse witness (2 constraints)."""
    x = as_lc(x)
    p = c.p
    inv = hint(c, lambda z: pow(z.eval(x), -1, p) if z.eval(x) % p else 0)
    flag = hint(c, lambda z: 0 if z.eval(x) % p else 1)
    c.enforce(x, inv, 1 - flag)
    c.enforce(x, flag, 0)
    return flag


def select(c: Circuit, flag: LCLike, a: LCLike, b: LCLike) -> LC:
    """``a`` if flag else ``b`` (flag must already be boolean)."""
    return as_lc(b) + c.mul(flag, as_lc(a) - as_lc(b))


def clamp_flags(c: Circuit, x: LCLike, lo: int, hi: int, bits: int) -> tuple[LC, LC, LC]:
    """(min(max(x, lo), hi), [x < lo], [x > hi]) for |x| < 2^bits."""
    x = as_lc(x)
    below = 1 - compare_leq(c, lo, x, bits)
    above = 1 - compare_leq(c, x, hi, bits)
    return x + c.mul(below, lo - x) + c.mul(above, hi - x), below, above


def clamp(c: Circuit, x: LCLike, lo: int, hi: int, bits: int) -> LC:
    """min(max(x, lo), hi), verified with two comparisons."""
    return clamp_flags(c, x, lo, hi, bits)[0]


def division_check(c: Circuit, dividend: LCLike, divisor: LCLike, quotient: LCLike, l: int, bits: int) -> None:
    """Enforce dividend * 2^l = divisor * quotient + r with 0 <= r < divisor."""
    r = as_lc(dividend) * (1 << l) - c.mul(divisor, quotient)
    split(c, r, bits)
    split(c, as_lc(divisor) - r - 1, bits)


def divide(c: Circuit, dividend: LCLike, divisor: LCLike, l: int, bits: int) -> LC:
    """Quotient witness floor(dividend * 2^l / divisor) with its division check."""
    dividend, divisor = as_lc(dividend), as_lc(divisor)

    def q(z: Assignment) -> int:
        d = z.eval(divisor)
        return (z.eval(dividend) << l) // d if d > 0 else 0

    quotient = hint(c, q)
    division_check(c, dividend, divisor, quotient, l, bits)
    return quotient


def sqrt_check(c: Circuit, x: LCLike, s: LCLike, bits: int) -> None:
    """Enforce s^2 <= x < (s+1)^2."""
    x, s = as_lc(x), as_lc(s)
    s2 = c.mul(s, s)
    split(c, x - s2, bits)
    split(c, s2 + 2 * s - x, bits)


def isqrt(c: Circuit, x: LCLike, bits: int) -> LC:
    from math import isqrt as _isqrt

    x = as_lc(x)
    s = hint(c, lambda z: _isqrt(max(z.eval(x), 0)))
    sqrt_check(c, x, s, bits)
    return s


def bits_to_lc(bits: Sequence[LCLike]) -> LC:
    return lc_sum(as_lc(b) * (1 << i) for i, b in enumerate(bits))
