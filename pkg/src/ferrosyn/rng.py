"""Deterministic substream helpers.

All stochastic code in the package draws from Philox counter-based
generators keyed by (base_seed, spawn_key). Because the key, not the
call order, selects the stream, grid points, cells and trials can be
evaluated in any order (or in parallel) and still reproduce bit-identical
results.
"""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "spawn_seed"]


def substream(seed: int, *key: int) -> np.random.Generator:
    """Return an independent generator for the given (seed, key...) path."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return np.random.Generator(np.random.Philox(ss))


def spawn_seed(seed: int, *key: int) -> int:
    """Derive a 63-bit child seed for handing to a nested component."""
    ss = np.random.SeedSequence(seed, spawn_key=tuple(int(k) for k in key))
    return int(ss.generate_state(1, dtype=np.uint64)[0] >> 1)
