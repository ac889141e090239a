"""64-bit seed mixing.

Per-frame and per-entity seeds are derived from the master seed with the
splitmix64 finalizer, so any frame can be generated without replaying the
ones before it.
"""

import hashlib

import numpy as np

MASK64 = (1 << 64) - 1


def mix64(value):
    z = (value + 0x9E3779B97F4A7C15) & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


def frame_seed(master, frame_index):
    return mix64((master & MASK64) ^ (frame_index & MASK64))


def derive(master, *labels):
    """Seed for a named sub-stream, e.g. derive(seed, 'placement', lane)."""
    z = master & MASK64
    for label in labels:
        if isinstance(label, str):
            label = int.from_bytes(hashlib.blake2b(label.encode(), digest_size=8).digest(), 'little')
        z = mix64(z ^ (label & MASK64))
    return z


def rng(seed):
    return np.random.default_rng(seed & MASK64)
