"""Portable, counter-based random stream used for parameter initialization.

The generator is splitmix64 (Steele et al., the JDK SplittableRandom mixer)
used in counter mode so any draw index is computable directly:

    out(seed, m)   = mix64((seed + (m+1) * 0x9E3779B97F4A7C15) mod 2^64)
    mix64(z): z ^= z >> 30; z *= 0xBF58476D1CE4E5B9  (mod 2^64)
              z ^= z >> 27; z *= 0x94D049BB133111EB  (mod 2^64)
              return z ^ (z >> 31)

    uniform(seed, m) = ((out(seed, m) >> 11) + 1) * 2^-53      in (0, 1]
    normal(seed, j)  = sqrt(-2 ln uniform(seed, 2j)) * cos(2*pi uniform(seed, 2j+1))

Every normal draw consumes exactly two uniforms (the Box-Muller sine partner
is discarded), so the j-th normal of a stream is the same in any
implementation that follows these formulas.
"""

from __future__ import annotations

import numpy as np

_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)
_U53 = 2.0 ** -53


def _mix64(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def raw_outputs(seed: int, start: int, count: int) -> np.ndarray:
    """splitmix64 outputs ``out(seed, start) .. out(seed, start+count-1)``."""
    idx = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64(np.uint64(seed & 0xFFFFFFFFFFFFFFFF) + idx * _GOLDEN)


def uniforms(seed: int, start: int, count: int) -> np.ndarray:
    """Uniform doubles in (0, 1], one per raw output."""
    return ((raw_outputs(seed, start, count) >> np.uint64(11)).astype(np.float64)
            + 1.0) * _U53


class NormalStream:
    """Sequential standard-normal draws from the seeded portable stream."""

    def __init__(self, seed: int):
        self.seed = seed
        self._next = 0  # index of the next normal draw

    def draw(self, count: int) -> np.ndarray:
        u = uniforms(self.seed, 2 * self._next, 2 * count)
        self._next += count
        u1 = u[0::2]
        u2 = u[1::2]
        return np.sqrt(-2.0 * np.log(u1)) * np.cos(2.0 * np.pi * u2)
