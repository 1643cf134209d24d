"""Deterministic 64-bit PRNG for the synthetic generators.

Algorithm, fixed for bit-reproducibility across platforms and versions:

  state     xoshiro256++ (Blackman & Vigna), four 64-bit words seeded by
            taking four successive outputs of splitmix64 applied to the
            user seed
  uniforms  (next_u64() >> 11) * 2^-53, in [0, 1)
  normals   Box-Muller: with u1 = ((next_u64() >> 11) + 1) * 2^-53 in
            (0, 1] and u2 a plain uniform, the pair is
            sqrt(-2 ln u1) * (cos, sin)(2 pi u2); the sine value is cached
            and returned on the next call

All arithmetic is on Python ints masked to 64 bits, so streams are
identical on every platform.
"""

from __future__ import annotations

import math

import numpy as np

_MASK = (1 << 64) - 1


def _splitmix64_stream(seed: int):
    state = seed & _MASK
    while True:
        state = (state + 0x9E3779B97F4A7C15) & _MASK
        z = state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        yield z ^ (z >> 31)


def _rotl(x: int, k: int) -> int:
    return ((x << k) | (x >> (64 - k))) & _MASK


class Xoshiro256PP:
    """xoshiro256++ generator with splitmix64 seeding."""

    def __init__(self, seed: int):
        stream = _splitmix64_stream(seed)
        self._s = [next(stream) for _ in range(4)]
        if not any(self._s):  # the all-zero state is invalid for xoshiro
            self._s[0] = 1
        self._cached_normal: float | None = None

    def next_u64(self) -> int:
        s0, s1, s2, s3 = self._s
        result = (_rotl((s0 + s3) & _MASK, 23) + s0) & _MASK
        t = (s1 << 17) & _MASK
        s2 ^= s0
        s3 ^= s1
        s1 ^= s2
        s0 ^= s3
        s2 ^= t
        s3 = _rotl(s3, 45)
        self._s = [s0, s1, s2, s3]
        return result

    def random(self) -> float:
        """Uniform double in [0, 1) from the top 53 bits."""
        return (self.next_u64() >> 11) * 2.0**-53

    def normal(self) -> float:
        """Standard normal deviate via the Box-Muller transform."""
        if self._cached_normal is not None:
            value = self._cached_normal
            self._cached_normal = None
            return value
        u1 = ((self.next_u64() >> 11) + 1) * 2.0**-53  # in (0, 1], keeps log finite
        u2 = self.random()
        radius = math.sqrt(-2.0 * math.log(u1))
        theta = 2.0 * math.pi * u2
        self._cached_normal = radius * math.sin(theta)
        return radius * math.cos(theta)

    def uniforms(self, count: int) -> np.ndarray:
        return np.array([self.random() for _ in range(count)])

    def normals(self, count: int) -> np.ndarray:
        return np.array([self.normal() for _ in range(count)])

    def randint_below(self, bound: int) -> int:
        """Unbiased integer in [0, bound) by rejection sampling."""
        if bound <= 0:
            raise ValueError(f"bound must be positive, got {bound!r}")
        limit = (1 << 64) - ((1 << 64) % bound)
        while True:
            u = self.next_u64()
            if u < limit:
                return u % bound

    def sample_indices(self, count: int, n: int) -> list[int]:
        """count distinct indices from range(n), returned sorted.

        Partial Fisher-Yates on the index array; consumption order is one
        randint_below per selected element.
        """
        if count > n:
            raise ValueError(f"cannot sample {count} indices from {n}")
        pool = list(range(n))
        for i in range(count):
            j = i + self.randint_below(n - i)
            pool[i], pool[j] = pool[j], pool[i]
        return sorted(pool[:count])
