"""Seeded shuffling with fully documented constants.

Fold assignment must regenerate identically from a seed in any language, so
we avoid library RNGs and pin SplitMix64 (Steele, Lea & Flood 2014):

    state  = (state + 0x9E3779B97F4A7C15) mod 2^64
    z      = state
    z      = (z XOR (z >> 30)) * 0xBF58476D1CE4E5B9  mod 2^64
    z      = (z XOR (z >> 27)) * 0x94D049BB133111EB  mod 2^64
    output = z XOR (z >> 31)

Bounded draws use the multiply-shift map floor(output * n / 2^64), and
shuffling is a Fisher-Yates pass from the last index down to 1.
"""

from __future__ import annotations

_MASK = (1 << 64) - 1


class SplitMix64:
    def __init__(self, seed: int):
        self.state = seed & _MASK

    def next_u64(self) -> int:
        self.state = (self.state + 0x9E3779B97F4A7C15) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def below(self, n: int) -> int:
        """Integer in [0, n) via the multiply-shift map."""
        return (self.next_u64() * n) >> 64

    def shuffle(self, items: list) -> None:
        for i in range(len(items) - 1, 0, -1):
            j = self.below(i + 1)
            items[i], items[j] = items[j], items[i]


def derive_seed(seed: int, *salts: int) -> int:
    """Deterministic child seed: fold each salt through one SplitMix64 step."""
    g = SplitMix64(seed)
    out = g.next_u64()
    for s in salts:
        g = SplitMix64(out ^ (s & _MASK))
        out = g.next_u64()
    return out
