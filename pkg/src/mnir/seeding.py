"""
Deterministic seed splitting.

Every random stream is addressed by a base seed plus an integer path, e.g.
``(seed, stream, replicate, attempt)``. The path is folded with SplitMix64::

    s = base mod 2**64
    for k in path:
        s = splitmix64(s XOR splitmix64(k))

and the result seeds a PCG64 generator. Streams for different paths are
independent for practical purposes, and a replicate's draws do not depend on
which worker runs it.
"""
from __future__ import annotations

import numpy as np

MASK64 = (1 << 64) - 1


def splitmix64(x: int) -> int:
    """One SplitMix64 output for state ``x`` (the state is advanced first)."""
    z = (x + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def derive_seed(base: int, *path: int) -> int:
    s = int(base) & MASK64
    for k in path:
        s = splitmix64(s ^ splitmix64(int(k) & MASK64))
    return s


def rng_for(base: int, *path: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(derive_seed(base, *path)))
