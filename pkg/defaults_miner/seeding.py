"""
Splittable seed derivation.

Every random stream in an experiment is derived from the master seed and a
path of labels, e.g. ``derive_seed(master, 'pso', replication, run)``, so
results never depend on execution order.
"""
import hashlib

import numpy as np


def _spawn_word(part):
    if isinstance(part, (int, np.integer)) and not isinstance(part, bool) and part >= 0:
        return int(part)
    digest = hashlib.sha256(str(part).encode('utf-8')).digest()
    return int.from_bytes(digest[:8], 'big')


def derive_seed(master, *path):
    """A 64-bit seed determined only by ``master`` and ``path``."""
    master = int(master)
    if master < 0:
        raise ValueError(f"master seed must be non-negative, got {master}")
    sequence = np.random.SeedSequence(entropy=master, spawn_key=tuple(_spawn_word(part) for part in path))
    high, low = sequence.generate_state(2, dtype=np.uint32)
    return (int(high) << 32) | int(low)


def make_rng(master, *path):
    return np.random.default_rng(derive_seed(master, *path))
