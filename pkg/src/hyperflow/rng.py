"""Named random streams derived from one root seed."""

from __future__ import annotations

import zlib

import numpy as np


def stream(seed: int, name: str, *index: int) -> np.random.Generator:
    """Generator for stage ``name`` (and optional integer sub-indices).

    The same (seed, name, index) always yields the same stream, independent
    of which other streams were drawn before it.
    """
    if seed is None:
        raise ValueError("a seed is required for stochastic stages")
    key = [int(seed) & 0xFFFFFFFF, zlib.crc32(name.encode("utf-8"))]
    key.extend(int(i) for i in index)
    return np.random.default_rng(np.random.SeedSequence(key))


def as_generator(seed_or_rng, name: str = "default") -> np.random.Generator:
    if isinstance(seed_or_rng, np.random.Generator):
        return seed_or_rng
    return stream(seed_or_rng, name)
