"""Seeded, splittable random streams.

Every stochastic component of the library derives its randomness from a
64-bit master seed plus an integer path, e.g. ``substream(seed, step)`` for
the step of a space construction or ``substream(seed, 2, m, trial)`` for one
experiment trial.  Streams for distinct paths are statistically independent,
so results do not depend on the order in which work is scheduled.

Philox is counter-based, which keeps the derivation cheap and reproducible
across runs and thread counts.
"""

from __future__ import annotations

import numpy as np

_SEED_MASK = 0xFFFFFFFFFFFFFFFF


def substream(seed: int, *path: int) -> np.random.Generator:
    """Return an independent generator for (seed, *path).

    Identical arguments always produce an identical stream.
    """
    entropy = [int(seed) & _SEED_MASK] + [int(p) & _SEED_MASK for p in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *path: int) -> int:
    """Collapse (seed, *path) into a single 64-bit seed for a child component."""
    entropy = [int(seed) & _SEED_MASK] + [int(p) & _SEED_MASK for p in path]
    return int(np.random.SeedSequence(entropy).generate_state(1, np.uint64)[0])
