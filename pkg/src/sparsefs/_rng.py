import zlib

import numpy as np


def derive_seed(seed, *keys):
    """Derive an independent 32-bit seed for a named sub-stream of ``seed``."""
    words = [int(seed) & 0xFFFFFFFF]
    for key in keys:
        if isinstance(key, str):
            words.append(zlib.crc32(key.encode()))
        else:
            words.append(int(key) & 0xFFFFFFFF)
    return int(np.random.SeedSequence(words).generate_state(1)[0])


def make_rng(seed, *keys):
    return np.random.default_rng(derive_seed(seed, *keys))
