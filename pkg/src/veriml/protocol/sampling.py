"""Challenge sampling and the exact soundness arithmetic behind it.

If a fraction ``t`` of the ``N`` committed iterations is genuine and the
client checks ``c`` of them uniformly without replacement, every check lands
on a genuine iteration with probability ``C(tN, c) / C(N, c)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction

from ..prng import PinnedPRNG


@dataclass(frozen=True)
class Challenge:
    indices: tuple[int, ...]  # sorted, distinct, 1-based
    freivald_seed: int = 0  # drawn with the indices, after the commitment

    @property
    def count(self) -> int:
        return len(self.indices)

    def to_json(self) -> dict:
        return {"indices": list(self.indices), "freivald_seed": self.freivald_seed}

    @classmethod
    def from_json(cls, obj: dict) -> Challenge:
        idx = tuple(int(i) for i in obj["indices"])
        if list(idx) != sorted(set(idx)):
            raise ValueError("challenge indices must be sorted and distinct")
        return cls(idx, int(obj.get("freivald_seed", 0)))


def genuine_count(N: int, t_frac) -> int:
    """floor(t * N), the number of honest iterations."""
    t = Fraction(t_frac)
    if not 0 <= t <= 1:
        raise ValueError("t_frac must lie in [0, 1]")
    return math.floor(t * N)


def all_genuine_probability(N: int, t_frac, c: int) -> Fraction:
    if not 0 <= c <= N:
        raise ValueError(f"need 0 <= c <= N, got c={c}, N={N}")
    g = genuine_count(N, t_frac)
    if c > g:
        return Fraction(0)
    p = Fraction(1)
    for k in range(c):
        p *= Fraction(g - k, N - k)
    return p


def detection_probability(N: int, t_frac, c: int) -> Fraction:
    """1 - C(tN, c) / C(N, c), exactly."""
    return 1 - all_genuine_probability(N, t_frac, c)


def relaxed_soundness_bound(p, l: int) -> Fraction:
    """p + (1 - p) / (2^l - 1): the escape probability once a forged field element can pass."""
    if l < 1:
        raise ValueError("l must be >= 1")
    p = Fraction(p)
    if not 0 <= p <= 1:
        raise ValueError("p must lie in [0, 1]")
    return p + (1 - p) / ((1 << l) - 1)


def required_challenges(N: int, t_frac, confidence) -> int:
    """Smallest c whose detection probability reaches ``confidence``."""
    conf = Fraction(confidence)
    if not 0 <= conf < 1:
        raise ValueError("confidence must lie in [0, 1)")
    g = genuine_count(N, t_frac)
    if g == N:
        raise ValueError("nothing is forged (t_frac = 1): no number of challenges detects it")
    miss = Fraction(1)
    for c in range(0, N + 1):
        if 1 - miss >= conf:
            return c
        miss *= Fraction(max(g - c, 0), N - c)
    return N


def storage_cost(l: int, d: int, N: int, m: int) -> int:
    """Checkpoint payload in bits: l * d * N / m."""
    if m <= 0:
        raise ValueError("checkpoint interval m must be positive")
    return l * d * N // m


def client_sample_challenges(N: int, c: int, client_randomness: int) -> Challenge:
    if not 1 <= c <= N:
        raise ValueError(f"need 1 <= c <= N, got c={c}, N={N}")
    rng = PinnedPRNG(client_randomness, "challenge")
    idx = tuple(sorted(i + 1 for i in rng.sample(N, c)))
    return Challenge(idx, rng.randbits(64))
