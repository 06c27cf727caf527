"""Seeded counter-based pseudo-random generator for reproducible instances.

The generator is SplitMix64: output i is a fixed 64-bit hash of seed + i * GAMMA,
so streams are identical on every platform and Python version.  The constants
below are the reference ones and are frozen; generated corpora depend on them.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


class SplitMix64:
    """Deterministic 64-bit counter-based generator."""

    def __init__(self, seed: int):
        self._state = seed & _MASK

    def next_u64(self) -> int:
        self._state = (self._state + _GAMMA) & _MASK
        z = self._state
        z = ((z ^ (z >> 30)) * _MIX1) & _MASK
        z = ((z ^ (z >> 27)) * _MIX2) & _MASK
        return z ^ (z >> 31)

    def randrange(self, n: int) -> int:
        """Uniform integer in [0, n), by rejection below the largest multiple."""
        if n <= 0:
            raise ValueError("randrange bound must be positive")
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % n

    def bit(self) -> int:
        return self.next_u64() >> 63

    def choice(self, seq):
        return seq[self.randrange(len(seq))]

    def sample_distinct(self, n: int, k: int) -> list:
        """k distinct values from range(n), in selection order."""
        if k > n:
            raise ValueError("sample size exceeds population")
        chosen: list = []
        seen = set()
        while len(chosen) < k:
            v = self.randrange(n)
            if v not in seen:
                seen.add(v)
                chosen.append(v)
        return chosen

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle."""
        for i in range(len(items) - 1, 0, -1):
            j = self.randrange(i + 1)
            items[i], items[j] = items[j], items[i]
