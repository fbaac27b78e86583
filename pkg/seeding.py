"""Hierarchical seed splitting.

A master seed fans out into independent streams keyed by a tuple of
integers (subject index, replication index, ...). Streams are addressed,
not drawn in sequence, so adding subject 190 never changes subject 1.
"""

from typing import Tuple

import numpy as np


def child_sequence(master_seed: int, *key: int) -> np.random.SeedSequence:
    """SeedSequence for the stream ``key`` under ``master_seed``."""
    if master_seed < 0:
        raise ValueError(f"seed must be non-negative, got {master_seed}")
    spawn_key: Tuple[int, ...] = tuple(int(k) for k in key)
    return np.random.SeedSequence(entropy=int(master_seed), spawn_key=spawn_key)


def stream(master_seed: int, *key: int) -> np.random.Generator:
    """Independent generator for the stream ``key`` under ``master_seed``."""
    return np.random.default_rng(child_sequence(master_seed, *key))


def stream_int(master_seed: int, *key: int) -> int:
    """32-bit integer seed for libraries that take ``random_state`` ints."""
    return int(child_sequence(master_seed, *key).generate_state(1)[0])
