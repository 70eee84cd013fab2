"""Counter-based random streams.

Every random draw in the package comes from a Philox generator keyed by a
root seed plus a tuple of integer counters (replication index, bootstrap
replicate index, redraw attempt, ...).  A stream depends only on its key, so
results do not depend on the order in which tasks run or on how they are
split across workers.
"""

from __future__ import annotations

import numpy as np


def root_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if seed is None:
        return np.random.SeedSequence()
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.SeedSequence(seed)


def child_sequence(seed, *key: int) -> np.random.SeedSequence:
    root = root_sequence(seed)
    return np.random.SeedSequence(
        root.entropy, spawn_key=tuple(root.spawn_key) + tuple(int(k) for k in key)
    )


def stream(seed, *key: int) -> np.random.Generator:
    """Generator for the stream addressed by ``(seed, *key)``."""
    return np.random.Generator(np.random.Philox(child_sequence(seed, *key)))


def fresh_seed() -> int:
    """Draw a seed from OS entropy (callers record it for reproducibility)."""
    return int(np.random.SeedSequence().entropy % (2**63))
