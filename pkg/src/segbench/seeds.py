"""Deterministic 64-bit seed derivation.

Every sampling or training job derives its own seed from a master seed and
its coordinates (setting, data set, split, model) through a splitmix64
chain, so jobs are independently reproducible and safe to run in parallel
without a shared RNG stream.
"""

from __future__ import annotations

import numpy as np

_MASK = (1 << 64) - 1
_GAMMA = 0x9E3779B97F4A7C15


def splitmix64(x: int) -> int:
    """One splitmix64 output step (Steele et al. finalizer)."""
    x = (x + _GAMMA) & _MASK
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
    return z ^ (z >> 31)


def _fold(value: int | str) -> int:
    if isinstance(value, str):
        # FNV-1a over utf-8 bytes; stable across processes, unlike hash().
        h = 0xCBF29CE484222325
        for b in value.encode("utf-8"):
            h = ((h ^ b) * 0x100000001B3) & _MASK
        return h
    return value & _MASK


def mix_seed(master: int, *coords: int | str) -> int:
    """Fold coordinates into a master seed, one splitmix64 step each.

    String coordinates (model ids, language tags) are folded through FNV-1a
    first; relying on built-in hash() would break cross-process determinism.
    The master is mixed before the first fold: a bare `master ^ coord` start
    would make (0, 1) and (1, 0) collide, and with it any two masters whose
    XOR matches a coordinate difference.
    """
    h = splitmix64(master & _MASK)
    for c in coords:
        h = splitmix64(h ^ _fold(c))
    return h


def rng_for(master: int, *coords: int | str) -> np.random.Generator:
    """A fresh PCG64 generator seeded from the mixed coordinates."""
    return np.random.Generator(np.random.PCG64(mix_seed(master, *coords)))
