"""Pinned splitmix64 stream.

splitmix64 is counter based: output ``i`` (1-based) is ``mix(seed + i * GAMMA)``
modulo 2**64, so a whole stream is computed in one vectorised pass and is
identical on every platform.

* Payload bits take the most significant bit of successive outputs.
* Uniforms take the top 53 bits, shifted into (0, 1].
* Gaussians come from Box-Muller on consecutive uniform pairs (u1, u2);
  each pair yields ``r*cos(2*pi*u2)`` then ``r*sin(2*pi*u2)``, in that order.
"""
from __future__ import annotations

import numpy as np
from numpy.typing import NDArray

MASK64 = (1 << 64) - 1
GAMMA = 0x9E3779B97F4A7C15
_MIX1 = np.uint64(0xBF58476D1CE4E5B9)
_MIX2 = np.uint64(0x94D049BB133111EB)


def normalize_seed(seed: int) -> int:
    return int(seed) & MASK64


def splitmix64(seed: int, n: int) -> NDArray[np.uint64]:
    """First ``n`` outputs of the splitmix64 generator seeded with ``seed``."""
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    counter = np.arange(1, n + 1, dtype=np.uint64)
    z = counter * np.uint64(GAMMA) + np.uint64(normalize_seed(seed))
    z = (z ^ (z >> np.uint64(30))) * _MIX1
    z = (z ^ (z >> np.uint64(27))) * _MIX2
    return z ^ (z >> np.uint64(31))


def random_bits(seed: int, n: int) -> NDArray[np.uint8]:
    return (splitmix64(seed, n) >> np.uint64(63)).astype(np.uint8)


def uniforms(seed: int, n: int) -> NDArray[np.float64]:
    """Uniform variates in (0, 1]."""
    top = (splitmix64(seed, n) >> np.uint64(11)).astype(np.float64)
    return (top + 1.0) * 2.0**-53


def gaussians(seed: int, n: int) -> NDArray[np.float64]:
    """Standard normal variates via Box-Muller, both outputs of each pair used."""
    pairs = (n + 1) // 2
    u = uniforms(seed, 2 * pairs)
    u1, u2 = u[0::2], u[1::2]
    radius = np.sqrt(-2.0 * np.log(u1))
    angle = 2.0 * np.pi * u2
    out = np.empty(2 * pairs, dtype=np.float64)
    out[0::2] = radius * np.cos(angle)
    out[1::2] = radius * np.sin(angle)
    return out[:n]


__all__ = ["MASK64", "normalize_seed", "splitmix64", "random_bits", "uniforms", "gaussians"]
