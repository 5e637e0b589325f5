"""Deterministic pseudo-randomness for every stochastic step in the engine.

All randomness flows through one named 64-bit generator (xoshiro256**) so that
runs are reproducible bit-for-bit regardless of wall clock, process, or dict
iteration order.  Independent streams are derived with :func:`subseed`, a
64-bit FNV-1a hash of ``master seed || purpose tag || numeric ids``; adding a
new purpose or class never perturbs the stream of another.
"""

from __future__ import annotations

import math

import numpy as np

_MASK64 = (1 << 64) - 1

FNV_OFFSET_BASIS = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3


def fnv1a64(data: bytes) -> int:
    """64-bit FNV-1a hash."""
    h = FNV_OFFSET_BASIS
    for byte in data:
        h ^= byte
        h = (h * FNV_PRIME) & _MASK64
    return h


def subseed(master: int, *parts: int | str) -> int:
    """Derive an independent 64-bit seed from a master seed and a path of parts.

    Integer parts are encoded as 8 little-endian bytes, strings as UTF-8.
    A 0xFF separator precedes every part so distinct paths cannot collide by
    concatenation.
    """
    data = bytearray((master & _MASK64).to_bytes(8, "little"))
    for part in parts:
        data.append(0xFF)
        if isinstance(part, str):
            data.extend(part.encode("utf-8"))
        else:
            data.extend((part & _MASK64).to_bytes(8, "little"))
    return fnv1a64(bytes(data))


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK64


def _splitmix64(state: int) -> tuple[int, int]:
    state = (state + 0x9E3779B97F4A7C15) & _MASK64
    z = state
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return state, z ^ (z >> 31)


class Xoshiro256StarStar:
    """xoshiro256** generator, state expanded from a 64-bit seed via SplitMix64."""

    def __init__(self, seed: int):
        state = seed & _MASK64
        s = []
        for _ in range(4):
            state, word = _splitmix64(state)
            s.append(word)
        if not any(s):  # all-zero state is the one forbidden fixed point
            s[0] = FNV_OFFSET_BASIS
        self._s = s

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s1 * 5) & _MASK64, 7) * 9) & _MASK64
        t = (s1 << 17) & _MASK64
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def u64_block(self, n: int) -> np.ndarray:
        out = np.empty(n, dtype=np.uint64)
        nxt = self.next_u64
        for i in range(n):
            out[i] = nxt()
        return out

    def random(self) -> float:
        """Uniform in [0, 1) with 53-bit resolution."""
        return (self.next_u64() >> 11) * 2.0**-53

    def uniforms(self, n: int) -> np.ndarray:
        return (self.u64_block(n) >> np.uint64(11)).astype(np.float64) * 2.0**-53

    def normals(self, n: int) -> np.ndarray:
        """n i.i.d. standard normals via the Box-Muller transform.

        Consumes exactly 2*ceil(n/2) generator words, so the stream position
        after the call depends only on n.
        """
        pairs = (n + 1) // 2
        words = self.u64_block(2 * pairs)
        # u1 in (0, 1] keeps log() finite; u2 in [0, 1).
        u1 = ((words[0::2] >> np.uint64(11)).astype(np.float64) + 1.0) * 2.0**-53
        u2 = (words[1::2] >> np.uint64(11)).astype(np.float64) * 2.0**-53
        radius = np.sqrt(-2.0 * np.log(u1))
        angle = 2.0 * math.pi * u2
        out = np.empty(2 * pairs, dtype=np.float64)
        out[0::2] = radius * np.cos(angle)
        out[1::2] = radius * np.sin(angle)
        return out[:n]

    def randbelow(self, n: int) -> int:
        """Unbiased integer in [0, n) by rejection on the top bits."""
        if n <= 0:
            raise ValueError("randbelow requires n >= 1")
        bits = (n - 1).bit_length()
        if bits == 0:
            return 0
        while True:
            r = self.next_u64() >> (64 - bits)
            if r < n:
                return r

    def shuffle(self, values) -> None:
        """In-place Fisher-Yates shuffle of a list or 1-D array."""
        for i in range(len(values) - 1, 0, -1):
            j = self.randbelow(i + 1)
            values[i], values[j] = values[j], values[i]

    def permutation(self, n: int) -> np.ndarray:
        perm = np.arange(n)
        self.shuffle(perm)
        return perm

    def sample_indices(self, n: int, k: int) -> np.ndarray:
        """k distinct indices from range(n), in draw order."""
        if k > n:
            raise ValueError("cannot sample more indices than available")
        return self.permutation(n)[:k]
