"""Named random substreams.

Each consumer (splitting, data generation, each bootstrap) derives its own
generator from the user seed plus a fixed purpose key, so reusing one seed
for several steps never makes their draws overlap.
"""

from __future__ import annotations

import zlib

import numpy as np


def seed_sequence(seed: int, purpose: str) -> np.random.SeedSequence:
    return np.random.SeedSequence(int(seed), spawn_key=(zlib.crc32(purpose.encode()),))


def stream(seed: int, purpose: str) -> np.random.Generator:
    return np.random.default_rng(seed_sequence(seed, purpose))
