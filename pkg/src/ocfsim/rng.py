"""Deterministic splittable RNG streams.

Every stochastic component draws from a stream derived from a single root
seed plus a structured path (replicate index, purpose tag, ...), so results
are reproducible regardless of execution order or parallelism.
"""
from __future__ import annotations

import numpy as np

# Stable numeric codes for stream purposes; never reorder or reuse.
PURPOSES = {
    "model": 0,
    "perm": 1,
    "schedule": 2,
    "preference": 3,
    "response": 4,
    "hidden": 5,
    "split": 6,
    "script": 7,
    "exploit": 8,
}


def stream(root_seed: int, *path: int | str) -> np.random.Generator:
    """Return a generator for the stream identified by (root_seed, path).

    Path elements may be ints or purpose names from PURPOSES. Identical
    arguments always yield an identical stream.
    """
    key = tuple(PURPOSES[p] if isinstance(p, str) else int(p) for p in path)
    return np.random.default_rng(np.random.SeedSequence(int(root_seed), spawn_key=key))
