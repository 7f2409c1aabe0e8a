"""Deterministic counter-based random streams.

Every random draw in the library comes from a stream keyed by
``(master_seed, stream_id)``.  Word ``c`` of a stream is a pure function of
``(master_seed, stream_id, c)``, so trials can be generated in any order, in
any batch size, on any number of threads, and still produce identical bits.
The generator is the SplitMix64 finalizer applied to a Weyl sequence, which
is more than enough for the statistical checks this library runs (entry
means, chi-square uniformity, coset frequencies).
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1

_GOLDEN = 0x9E3779B97F4A7C15
_MIX1 = 0xBF58476D1CE4E5B9
_MIX2 = 0x94D049BB133111EB


def mix64(z: int) -> int:
    """SplitMix64 finalizer: a fixed avalanche permutation of 64-bit words."""
    z &= MASK64
    z = ((z ^ (z >> 30)) * _MIX1) & MASK64
    z = ((z ^ (z >> 27)) * _MIX2) & MASK64
    return z ^ (z >> 31)


def stream_seed(master_seed: int, stream_id: int) -> int:
    """Base state of stream ``stream_id`` under ``master_seed``."""
    z = mix64(master_seed)
    return mix64((z + ((stream_id & MASK64) * _GOLDEN)) & MASK64)


def stream_word(seed: int, counter: int) -> int:
    """Word ``counter`` of the stream whose base state is ``seed``."""
    return mix64((seed + (((counter & MASK64) + 1) * _GOLDEN)) & MASK64)


class BitStream:
    """Sequential view of one stream; hands out words, bit blocks, and ranges."""

    def __init__(self, master_seed: int, stream_id: int = 0):
        self.master_seed = master_seed & MASK64
        self.stream_id = stream_id & MASK64
        self._seed = stream_seed(master_seed, stream_id)
        self.counter = 0

    def next_word(self) -> int:
        word = stream_word(self._seed, self.counter)
        self.counter += 1
        return word

    def words(self, count: int) -> list[int]:
        return [self.next_word() for _ in range(count)]

    def bits(self, nbits: int) -> int:
        """An ``nbits``-bit integer; bit i of the result is coordinate i.

        Consumes ceil(nbits/64) words, little-endian word order.
        """
        if nbits < 0:
            raise ValueError("nbits must be nonnegative")
        value = 0
        for w in range((nbits + 63) // 64):
            value |= self.next_word() << (64 * w)
        return value & ((1 << nbits) - 1)

    def below(self, n: int) -> int:
        """Uniform integer in [0, n), by rejection on the next power of two."""
        if n <= 0:
            raise ValueError("n must be positive")
        if n == 1:
            return 0
        nbits = (n - 1).bit_length()
        while True:
            v = self.bits(nbits)
            if v < n:
                return v


# Vectorized counterparts.  These must generate exactly the same words as the
# scalar functions above; tests compare the two paths directly.

_GOLDEN_U = np.uint64(_GOLDEN)
_MIX1_U = np.uint64(_MIX1)
_MIX2_U = np.uint64(_MIX2)


def mix64_array(z: np.ndarray) -> np.ndarray:
    z = z.astype(np.uint64, copy=True)
    z ^= z >> np.uint64(30)
    z *= _MIX1_U
    z ^= z >> np.uint64(27)
    z *= _MIX2_U
    z ^= z >> np.uint64(31)
    return z


def stream_seeds(master_seed: int, stream_ids: np.ndarray) -> np.ndarray:
    z = np.uint64(mix64(master_seed))
    ids = stream_ids.astype(np.uint64, copy=False)
    return mix64_array(z + ids * _GOLDEN_U)


def stream_words(seeds: np.ndarray, counters: np.ndarray, count: int) -> np.ndarray:
    """Block of words: result[i, j] = stream_word(seeds[i], counters[i] + j)."""
    seeds = seeds.astype(np.uint64, copy=False)
    counters = counters.astype(np.uint64, copy=False)
    offsets = np.arange(1, count + 1, dtype=np.uint64)
    states = seeds[:, None] + (counters[:, None] + offsets[None, :]) * _GOLDEN_U
    return mix64_array(states)
