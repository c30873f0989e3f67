"""Self-contained deterministic PRNG primitives.

Everything that must reproduce bit-exactly across runs and platforms
(dataset splits, epoch shuffles, weight init) goes through this module
instead of a library generator whose stream may change between versions.

Two generators, both from the xoshiro family of Blackman and Vigna:

* ``splitmix64`` -- used as a stateless counter-based stream: output i is
  ``avalanche(seed + (i+1) * GOLDEN)``.  Vectorizes over numpy uint64
  arrays, which is what makes large weight-matrix init fast.
* ``Xoshiro256StarStar`` -- the sequential xoshiro256** generator, seeded
  from splitmix64 per the reference implementation, used for shuffling.
"""

from __future__ import annotations

import numpy as np

_MASK64 = 0xFFFFFFFFFFFFFFFF
_GOLDEN = 0x9E3779B97F4A7C15


def _avalanche(x: int) -> int:
    """splitmix64's xor-shift/multiply output mix (finalizer)."""
    x &= _MASK64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _MASK64
    return x ^ (x >> 31)


def splitmix64_array(seed: int, n: int) -> np.ndarray:
    """First n outputs of splitmix64 started at ``seed`` (uint64 array)."""
    with np.errstate(over="ignore"):
        x = (np.uint64(seed & _MASK64)
             + np.arange(1, n + 1, dtype=np.uint64) * np.uint64(_GOLDEN))
        x = (x ^ (x >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
        x = (x ^ (x >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
        return x ^ (x >> np.uint64(31))


def uniform_array(seed: int, n: int, low: float, high: float) -> np.ndarray:
    """n uniform float64 values in [low, high), bit-deterministic in seed.

    Each value is u * (high - low) + low with u = (bits >> 11) * 2**-53,
    the standard 53-bit conversion.
    """
    bits = splitmix64_array(seed, n)
    u = (bits >> np.uint64(11)).astype(np.float64) * (2.0 ** -53)
    return u * (high - low) + low


def derive_seed(master: int, *tags: str) -> int:
    """Derive an independent stream seed from a master seed and name tags.

    Mixing the FNV-1a hash of each tag keeps per-tensor and per-epoch
    streams decoupled: adding or removing one consumer does not shift
    anyone else's stream.
    """
    s = master & _MASK64
    for tag in tags:
        h = 0xCBF29CE484222325
        for b in tag.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & _MASK64
        s = _avalanche((s ^ h) + _GOLDEN)
    return s


class Xoshiro256StarStar:
    """xoshiro256** 1.0, seeded from splitmix64.

    Reference algorithm: state s[0..3]; output rotl(s[1]*5, 7)*9; state
    update via xor-shifts and rotl(s[3], 45).  Bounded draws use rejection
    sampling with a bitmask, so shuffles are unbiased and reproducible.
    """

    def __init__(self, seed: int):
        state = seed & _MASK64
        self.s = []
        for _ in range(4):
            state = (state + _GOLDEN) & _MASK64
            self.s.append(_avalanche(state))
        if all(v == 0 for v in self.s):  # degenerate all-zero state
            self.s[0] = 1

    @staticmethod
    def _rotl(x: int, k: int) -> int:
        return ((x << k) | (x >> (64 - k))) & _MASK64

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self.s
        result = (self._rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = self._rotl(s3, 45)
        self.s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform float64 in [0, 1) via the standard 53-bit conversion."""
        return (self.next_u64() >> 11) * (2.0 ** -53)

    def next_below(self, n: int) -> int:
        """Unbiased integer in [0, n) via bitmask rejection."""
        if n <= 0:
            raise ValueError("n must be positive")
        mask = (1 << (n - 1).bit_length()) - 1
        while True:
            r = self.next_u64() & mask
            if r < n:
                return r

    def shuffle(self, items: list) -> None:
        """In-place Fisher-Yates shuffle (descending index convention)."""
        for i in range(len(items) - 1, 0, -1):
            j = self.next_below(i + 1)
            items[i], items[j] = items[j], items[i]
