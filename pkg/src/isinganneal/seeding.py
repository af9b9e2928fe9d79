"""Seed derivation for reproducible batches.

Every random stream in the package is a ``numpy.random.Generator`` over
``PCG64`` seeded with a 64-bit integer.  Batch seeds are derived with the
SplitMix64 finaliser chained over the index tuple::

    h = splitmix64(master)
    for x in indices:
        h = splitmix64(h ^ x)

so ``derive_seed(master, instance, run)`` is identical on every machine and
independent of scheduling order.  This function is part of the external
contract of the CLI reports.
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


def derive_seed(master: int, *indices: int) -> int:
    h = splitmix64(int(master) & MASK64)
    for x in indices:
        h = splitmix64(h ^ (int(x) & MASK64))
    return h


def make_rng(seed: int | np.random.Generator) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.Generator(np.random.PCG64(int(seed) & MASK64))
