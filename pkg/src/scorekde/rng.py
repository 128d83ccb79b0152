"""Deterministic derivation of child RNG streams from a master seed."""

from __future__ import annotations

import numpy as np

__all__ = ["substream", "derived_seed"]

# Stream namespace tags: the first key slot of every substream/derived_seed
# call. Keeping them in one registry guarantees that two subsystems never
# collide on a key path (trajectory j uses (seed, TRAJECTORY, j), replicate r
# uses (seed, REPLICATE, r), and so on).
TRAJECTORY = 0
REPLICATE = 1
DATASET = 2
DRAW = 3
PERMUTE = 4
PROBE = 5


def substream(seed: int, *key: int) -> np.random.Generator:
    """Child generator identified by ``(seed, *key)``.

    The child is seeded with the entropy sequence ``[seed, *key]``, so a
    given key path always yields the same stream no matter how many other
    streams exist, how work is chunked, or which worker thread asks for it.
    """
    if int(seed) < 0:
        raise ValueError(f"master seed must be nonnegative, got {seed}")
    return np.random.default_rng(
        np.random.SeedSequence([int(seed), *(int(k) for k in key)])
    )


def derived_seed(seed: int, *key: int) -> int:
    """Collapse ``(seed, *key)`` to one integer seed for APIs that take one."""
    if int(seed) < 0:
        raise ValueError(f"master seed must be nonnegative, got {seed}")
    sequence = np.random.SeedSequence([int(seed), *(int(k) for k in key)])
    return int(sequence.generate_state(1, np.uint64)[0])
