"""Deterministic RNG substreams derived from a master seed.

Every source of randomness in a run is a ``numpy`` Generator seeded by the
master seed plus a tuple of context keys (module tag, sample index, phase
tag, ...), so results are independent of evaluation order and replayable
from the manifest.
"""

from __future__ import annotations

import zlib

import numpy as np


def _key_to_int(key) -> int:
    if isinstance(key, (int, np.integer)):
        return int(key) & 0xFFFFFFFF
    if isinstance(key, str):
        return zlib.crc32(key.encode())
    raise TypeError(f"RNG stream keys must be ints or strings, got {type(key)}")


def substream(master_seed: int, *keys) -> np.random.Generator:
    """Generator for the stream identified by (master_seed, *keys)."""
    entropy = [int(master_seed) & 0xFFFFFFFFFFFFFFFF] + [_key_to_int(k) for k in keys]
    return np.random.default_rng(np.random.SeedSequence(entropy))
