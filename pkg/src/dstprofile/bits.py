"""Bit sources: explicit strings and the SplitMix64 stream family."""
from __future__ import annotations

from typing import List

from .errors import BitExhausted

MASK = (1 << 64) - 1
GOLDEN = 0x9E3779B97F4A7C15
MIX1 = 0xBF58476D1CE4E5B9
MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer."""
    z &= MASK
    z = ((z ^ (z >> 30)) * MIX1) & MASK
    z = ((z ^ (z >> 27)) * MIX2) & MASK
    return z ^ (z >> 31)


def stream_state(master_seed: int, trial: int, record: int) -> int:
    """Initial SplitMix64 state of the stream for (seed, trial, record)."""
    s0 = mix64((master_seed & MASK) ^ ((trial * GOLDEN) & MASK))
    return mix64(s0 ^ ((record * MIX1) & MASK))


class BitSource:
    """Supplies bit d of a record on demand."""

    def bit(self, d: int) -> int:
        raise NotImplementedError


class ExplicitBits(BitSource):
    def __init__(self, bits: str):
        if any(c not in "01" for c in bits):
            raise ValueError("bit strings contain only 0 and 1")
        self.bits = bits

    def bit(self, d: int) -> int:
        if d >= len(self.bits):
            raise BitExhausted(f"record {self.bits!r} has no bit {d}")
        return 1 if self.bits[d] == "1" else 0

    def __repr__(self):
        return f"ExplicitBits({self.bits!r})"


class SplitMixBits(BitSource):
    """Bits are the 64-bit outputs of SplitMix64 from the stream state, MSB first."""

    def __init__(self, master_seed: int, trial: int, record: int):
        self.key = (master_seed, trial, record)
        self._state = stream_state(master_seed, trial, record)
        self._words: List[int] = []

    def _word(self, i: int) -> int:
        while len(self._words) <= i:
            self._state = (self._state + GOLDEN) & MASK
            self._words.append(mix64(self._state))
        return self._words[i]

    def bit(self, d: int) -> int:
        return (self._word(d >> 6) >> (63 - (d & 63))) & 1

    def __repr__(self):
        return "SplitMixBits(seed=%d, trial=%d, record=%d)" % self.key
