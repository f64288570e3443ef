"""Deterministic seed derivation.

Every random draw in the package goes through ``rng_for`` so that a master
seed plus a tuple of integer keys (domain id, stream index, trial number...)
always maps to the same independent generator, regardless of the order in
which the streams are consumed.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(master: int, *keys: int) -> int:
    """Fold integer keys into a 64-bit master seed with splitmix64."""
    state = splitmix64(int(master) & MASK64)
    for k in keys:
        state = splitmix64(state ^ (int(k) & MASK64))
    return state


def rng_for(master: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(derive_seed(master, *keys))
