"""Polynomial sigmoid approximations in fixed point.

Both cubics are evaluated with the same integer schedule as the circuit:
``x2 = x*x``, ``x3 = x*x2``, ``f = A3*x3 + A1*x*2^(2l) + A0*2^(3l)`` at scale
``2^(4l)``, floored back to ``2^l``.
"""

from __future__ import annotations

import math
from fractions import Fraction

from .fixedpoint import encode_raw

SIGMOID_COEFFS = {
    "remez": (Fraction(-4, 1000), Fraction(197, 1000), Fraction(1, 2)),
    "taylor": (Fraction(-1, 48), Fraction(1, 4), Fraction(1, 2)),
}
CLAMP = 5


def coeffs_raw(variant: str, l: int) -> tuple[int, int, int]:
    a3, a1, a0 = SIGMOID_COEFFS[variant]
    return encode_raw(a3, l), encode_raw(a1, l), encode_raw(a0, l)


def clamp_raw(x: int, l: int, bound: int = CLAMP) -> int:
    lim = bound << l
    return max(-lim, min(lim, x))


def sigmoid_poly_raw(x: int, l: int, variant: str = "remez") -> int:
    """Cubic sigmoid of a raw value at scale 2^l (caller clamps)."""
    a3, a1, a0 = coeffs_raw(variant, l)
    x2 = x * x
    x3 = x * x2
    full = a3 * x3 + a1 * x * (1 << 2 * l) + a0 * (1 << 3 * l)
    return full >> (3 * l)


def sigmoid_poly_deriv_raw(x: int, l: int, variant: str = "remez") -> int:
    """Derivative 3*A3*x^2 + A1 at scale 2^l."""
    a3, a1, _ = coeffs_raw(variant, l)
    return (3 * a3 * x * x + a1 * (1 << 2 * l)) >> (2 * l)


def sigmoid_piecewise_raw(x: int, l: int) -> int:
    """Hard sigmoid clip(0.2x + 0.5, 0, 1); native only."""
    one = 1 << l
    y = (x // 5) + (one >> 1)
    return max(0, min(one, y))


def sigmoid_poly_float(x: float, variant: str = "remez") -> float:
    a3, a1, a0 = (float(c) for c in SIGMOID_COEFFS[variant])
    return a3 * x**3 + a1 * x + a0


def sigmoid(x: float) -> float:
    return 1.0 / (1.0 + math.exp(-x))


def sigmoid_raw(x: int, l: int, variant: str = "remez") -> int:
    if variant == "piecewise":
        return sigmoid_piecewise_raw(x, l)
    return sigmoid_poly_raw(clamp_raw(x, l), l, variant)
