"""Deterministic 64-bit seed derivation and sampling streams.

All randomness in the package flows through the SplitMix64 finalizer so
that any run is reproducible from a single master seed, in any language:

    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9;
              z ^= z >> 27; z *= 0x94D049BB133111EB; z ^= z >> 31

`split(seed, *indices)` folds each index into the state with the golden
ratio increment 0x9E3779B97F4A7C15 followed by one mix64 round, so
distinct index tuples yield statistically unrelated streams.
"""

from __future__ import annotations

from fractions import Fraction

MASK64 = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
_MUL1 = 0xBF58476D1CE4E5B9
_MUL2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    z &= MASK64
    z ^= z >> 30
    z = (z * _MUL1) & MASK64
    z ^= z >> 27
    z = (z * _MUL2) & MASK64
    z ^= z >> 31
    return z


def split(seed: int, *indices: int) -> int:
    """Derive a child seed from a master seed and an index tuple."""
    state = seed & MASK64
    for x in indices:
        state = mix64((state + GOLDEN + (x & MASK64)) & MASK64)
    if not indices:
        state = mix64((state + GOLDEN) & MASK64)
    return state


def coin_bit(seed: int, *indices: int) -> int:
    """One reproducible fair bit keyed by (seed, indices)."""
    return split(seed, *indices) & 1


class Stream:
    """Sequential SplitMix64 generator."""

    def __init__(self, seed: int):
        self._state = seed & MASK64

    def next_u64(self) -> int:
        self._state = (self._state + GOLDEN) & MASK64
        return mix64(self._state)

    def next_bit(self) -> int:
        return self.next_u64() & 1

    def choose(self, cumulative_numerators: list[int], denominator: int) -> int:
        """Pick an index with exact rational weights.

        `cumulative_numerators[i]` is the numerator of the cumulative
        probability through index i over the common `denominator`; the
        last entry must equal the denominator.  The draw compares a
        64-bit uniform against the exact thresholds, so the only
        discretization is the 2^-64 grid of the generator itself.
        """
        r = self.next_u64()
        lhs = r * denominator
        for i, c in enumerate(cumulative_numerators):
            if lhs < c << 64:
                return i
        return len(cumulative_numerators) - 1

    def below(self, p: Fraction) -> bool:
        """True with probability p (exact threshold on the u64 grid)."""
        r = self.next_u64()
        return r * p.denominator < p.numerator << 64
