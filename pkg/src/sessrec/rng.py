"""Named deterministic random substreams derived from a single run seed.

Every source of randomness in the library (parameter init, satellite edge
sampling, negative sampling, dropout, shuffling, synthetic corpora) pulls
its generator from here, so results depend only on the run seed and the
logical position (epoch, session index, ...) of the draw, never on
scheduling or call order elsewhere.
"""

import zlib

import numpy as np


def substream(seed: int, name: str, *indices: int) -> np.random.Generator:
    """Generator for stream ``name`` at logical position ``indices``."""
    tag = zlib.crc32(name.encode("utf-8"))
    return np.random.default_rng(np.random.SeedSequence([int(seed), tag, *map(int, indices)]))
