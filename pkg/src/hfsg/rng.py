"""Named, order-independent random streams.

Every random draw in the package comes from a Philox (counter-based, 64-bit)
generator keyed by the run seed plus a path of names/indices, so that e.g. the
draws for cluster 7 do not depend on how many clusters were sampled before it.
"""

import zlib

import numpy as np


def _key(part):
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def stream(seed, *path):
    """Return a generator for ``seed`` and the named sub-stream ``path``."""
    if int(seed) < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=tuple(_key(p) for p in path))
    return np.random.Generator(np.random.Philox(ss))
