import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    """Independent generator for one named pipeline stage under a master seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(zlib.crc32(name.encode()),)))
