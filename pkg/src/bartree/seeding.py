"""Seed derivation for independent replicate streams.

Every random draw in the package comes from a generator built by :func:`make_rng`
from a seed produced by :func:`derive_seed`; there is no ambient entropy.
"""

from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15


def mix64(x: int) -> int:
    """The splitmix64 finalizer on a 64-bit unsigned integer."""
    x &= MASK64
    x ^= x >> 30
    x = (x * 0xBF58476D1CE4E5B9) & MASK64
    x ^= x >> 27
    x = (x * 0x94D049BB133111EB) & MASK64
    x ^= x >> 31
    return x


def derive_seed(master_seed: int, replicate_index: int) -> int:
    """Child seed ``mix64(master ^ (index + 1) * GOLDEN_GAMMA)`` for one replicate."""
    offset = ((int(replicate_index) + 1) * GOLDEN_GAMMA) & MASK64
    return mix64((int(master_seed) & MASK64) ^ offset)


def make_rng(seed) -> np.random.Generator:
    """PCG64 generator for a 64-bit seed; an existing Generator is passed through."""
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
