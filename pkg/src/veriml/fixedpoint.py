"""Fixed-point numbers with explicit scale tracking.

A value is stored as a signed integer ``raw`` together with the number of
fractional bits ``frac_bits``; the represented real is ``raw / 2**frac_bits``.
Multiplication does not rescale (the scale of a product is the sum of the
scales), which is exactly how the arithmetic circuits see these numbers.
Truncation floors toward negative infinity so that the remainder witness of
the circuit truncation check is always in ``[0, 2**shift)``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from numbers import Rational, Real

DEFAULT_FRAC_BITS = 32
DEFAULT_INT_BUDGET = 16


class FixedPointOverflow(ArithmeticError):
    pass


class ScaleMismatch(ValueError):
    pass


def _as_fraction(x) -> Fraction:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, (int, Rational)):
        return Fraction(x)
    if isinstance(x, str):
        return Fraction(x)
    if isinstance(x, Real):
        return Fraction(float(x))
    raise TypeError(f"cannot encode {type(x).__name__} as fixed point")


def round_half_away(q: Fraction) -> int:
    """Round a rational to the nearest integer, ties away from zero."""
    n = (abs(q.numerator) * 2 + q.denominator) // (2 * q.denominator)
    return n if q >= 0 else -n


def trunc(raw: int, shift: int) -> int:
    """Floor division by ``2**shift`` (Python's ``>>`` already floors)."""
    if shift < 0:
        raise ValueError("shift must be non-negative")
    return raw >> shift


@dataclass(frozen=True)
class FixedPoint:
    raw: int
    frac_bits: int
    int_budget: int = DEFAULT_INT_BUDGET

    def __post_init__(self):
        if self.frac_bits < 0:
            raise ValueError("frac_bits must be non-negative")
        if abs(self.raw) >= 1 << (self.int_budget + self.frac_bits):
            raise FixedPointOverflow(
                f"|raw| = {abs(self.raw)} exceeds 2^({self.int_budget}+{self.frac_bits})"
            )

    @property
    def value(self) -> Fraction:
        return Fraction(self.raw, 1 << self.frac_bits)

    def __float__(self) -> float:
        return float(self.value)

    def _check_scale(self, other: FixedPoint) -> None:
        if self.frac_bits != other.frac_bits:
            raise ScaleMismatch(f"scale 2^{self.frac_bits} vs 2^{other.frac_bits}")

    def __add__(self, other: FixedPoint) -> FixedPoint:
        self._check_scale(other)
        return FixedPoint(self.raw + other.raw, self.frac_bits, self.int_budget)

    def __sub__(self, other: FixedPoint) -> FixedPoint:
        self._check_scale(other)
        return FixedPoint(self.raw - other.raw, self.frac_bits, self.int_budget)

    def __neg__(self) -> FixedPoint:
        return FixedPoint(-self.raw, self.frac_bits, self.int_budget)

    def to_json(self) -> dict:
        return {"raw": self.raw, "frac_bits": self.frac_bits}

    @classmethod
    def from_json(cls, obj: dict, int_budget: int = DEFAULT_INT_BUDGET) -> FixedPoint:
        return cls(int(obj["raw"]), int(obj["frac_bits"]), int_budget)


def encode(x, l: int, int_budget: int = DEFAULT_INT_BUDGET) -> FixedPoint:
    """Encode a real as ``round(x * 2**l)`` with ties away from zero."""
    if l < 0:
        raise ValueError("l must be non-negative")
    q = _as_fraction(x)
    if abs(q) >= 1 << int_budget:
        raise FixedPointOverflow(f"|{float(q)}| >= 2^{int_budget}")
    return FixedPoint(round_half_away(q * (1 << l)), l, int_budget)


def encode_raw(x, l: int) -> int:
    """Unchecked ``encode`` returning only the raw integer."""
    return round_half_away(_as_fraction(x) * (1 << l))


def decode(a: FixedPoint) -> Fraction:
    return a.value


def mul_raw(a: FixedPoint, b: FixedPoint) -> FixedPoint:
    """Product without rescaling: the result lives at scale ``2**(la + lb)``."""
    budget = max(a.int_budget, b.int_budget)
    return FixedPoint(a.raw * b.raw, a.frac_bits + b.frac_bits, budget)


def truncate(a: FixedPoint, target_l: int) -> FixedPoint:
    if target_l > a.frac_bits:
        raise ValueError("cannot truncate to a finer scale")
    return FixedPoint(trunc(a.raw, a.frac_bits - target_l), target_l, a.int_budget)


def rescale(a: FixedPoint, target_l: int) -> FixedPoint:
    """Move to another scale: exact lift upward, floor downward."""
    if target_l >= a.frac_bits:
        return FixedPoint(a.raw << (target_l - a.frac_bits), target_l, a.int_budget)
    return truncate(a, target_l)


def to_field(a: FixedPoint | int, p: int) -> int:
    """Two's-complement style embedding of a signed raw into ``Z_p``."""
    raw = a.raw if isinstance(a, FixedPoint) else a
    if 2 * abs(raw) >= p:
        raise OverflowError("|raw| must be below p/2 for an injective embedding")
    return raw % p


def from_field(x: int, p: int) -> int:
    """Inverse of :func:`to_field`: the signed representative in (-p/2, p/2]."""
    x %= p
    return x - p if 2 * x > p else x
