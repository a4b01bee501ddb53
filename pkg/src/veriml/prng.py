"""Pinned, platform-independent PRNG shared by server and client.

Block ``j`` of the stream for ``(seed, domain)`` is
``SHA-256(b"VERIML-PRNG" || domain || seed_le64 || j_le64)``.  Integers are
drawn by rejection sampling on the byte stream, so both parties reproduce the
same values bit for bit without depending on Python's ``random`` module.
"""

from __future__ import annotations

import hashlib
import math
import struct

PRNG_TAG = b"VERIML-PRNG"
MASK64 = (1 << 64) - 1


def _tag(domain: bytes | str) -> bytes:
    return domain.encode() if isinstance(domain, str) else bytes(domain)


def prng_block(seed: int, domain: bytes | str, j: int) -> bytes:
    return hashlib.sha256(
        PRNG_TAG + _tag(domain) + struct.pack("<Q", seed & MASK64) + struct.pack("<Q", j)
    ).digest()


def domain_with_counter(name: str, counter: int) -> bytes:
    return name.encode() + struct.pack("<Q", counter)


class PinnedPRNG:
    def __init__(self, seed: int, domain: bytes | str):
        if not 0 <= seed <= MASK64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        self.seed = seed
        self.domain = _tag(domain)
        self._block = 0
        self._buf = b""

    def read(self, n: int) -> bytes:
        while len(self._buf) < n:
            self._buf += prng_block(self.seed, self.domain, self._block)
            self._block += 1
        out, self._buf = self._buf[:n], self._buf[n:]
        return out

    def randbits(self, k: int) -> int:
        if k <= 0:
            return 0
        v = int.from_bytes(self.read((k + 7) // 8), "little")
        return v & ((1 << k) - 1)

    def randbelow(self, n: int) -> int:
        if n <= 0:
            raise ValueError("n must be positive")
        k = (n - 1).bit_length()
        while True:
            v = self.randbits(k)
            if v < n:
                return v

    def randrange(self, lo: int, hi: int) -> int:
        return lo + self.randbelow(hi - lo)

    def random(self) -> float:
        return self.randbits(53) / float(1 << 53)

    def uniform(self, a: float, b: float) -> float:
        return a + (b - a) * self.random()

    def gauss(self, mu: float = 0.0, sigma: float = 1.0) -> float:
        # Box-Muller, one variate per call keeps the stream position simple
        u1 = 1.0 - self.random()
        u2 = self.random()
        return mu + sigma * math.sqrt(-2.0 * math.log(u1)) * math.cos(2 * math.pi * u2)

    def shuffle(self, items: list) -> list:
        for i in range(len(items) - 1, 0, -1):
            j = self.randbelow(i + 1)
            items[i], items[j] = items[j], items[i]
        return items

    def sample(self, population: int, k: int) -> list[int]:
        """``k`` distinct values from ``range(population)`` (partial Fisher-Yates)."""
        if not 0 <= k <= population:
            raise ValueError("sample larger than population")
        pool = list(range(population))
        for i in range(k):
            j = i + self.randbelow(population - i)
            pool[i], pool[j] = pool[j], pool[i]
        return pool[:k]
