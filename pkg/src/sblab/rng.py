"""Deterministic seed derivation.

Every piece of randomness in the package flows from explicit integer seeds
mixed with a splitmix64-style hash, so that per-instance / per-episode /
per-epoch generators are independent of each other and of execution order
or thread count.
"""

import numpy as np

_MASK64 = (1 << 64) - 1


def _splitmix64(x: int) -> int:
    x = (x + 0x9E3779B97F4A7C15) & _MASK64
    z = x
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK64
    return (z ^ (z >> 31)) & _MASK64


def derive_seed(*parts) -> int:
    """Mix integers and/or strings into one 64-bit seed.

    Stable across platforms and library versions (no reliance on hash()).
    """
    state = 0x5B1CE5EDF00D
    for part in parts:
        if isinstance(part, str):
            for byte in part.encode("utf-8"):
                state = _splitmix64(state ^ byte)
        else:
            state = _splitmix64(state ^ (int(part) & _MASK64))
    return state


def rng_from(*parts) -> np.random.Generator:
    """A fresh PCG64 generator seeded from derive_seed(*parts)."""
    return np.random.default_rng(derive_seed(*parts))
