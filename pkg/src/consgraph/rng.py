"""Named random streams derived from one run seed.

Each stage draws from ``stream(seed, name)``; the stage name is hashed into
the seed sequence so adding a stage never shifts another stage's draws.
"""

import hashlib

import numpy as np


def stream_key(name):
    return int.from_bytes(hashlib.sha256(name.encode("utf-8")).digest()[:8], "little")


def stream(seed, name):
    return np.random.default_rng(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key(name)]))


def substream_seed(seed, name):
    """Integer seed for a child stage, e.g. per-instance generator seeds."""
    return int(np.random.SeedSequence([int(seed) & 0xFFFFFFFFFFFFFFFF, stream_key(name)]).generate_state(1, np.uint64)[0])
