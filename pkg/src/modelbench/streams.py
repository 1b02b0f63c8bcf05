"""Named, splittable random streams.

Every random draw in the package comes from a :class:`numpy.random.Generator`
built by :func:`stream`. A stream is identified by a master seed, a purpose
tag (``"train"``, ``"val"``, ``"init"``, ...) and any number of integer
indices, so independent experiments never share state and a stream can be
rebuilt anywhere (e.g. in a worker process) from its identity alone::

    rng = stream(1234, "train", n, run_index)

The identity is hashed into a :class:`numpy.random.SeedSequence` spawn key
and fed to PCG64.
"""
import zlib

import numpy as np


def tag_code(tag: str) -> int:
    return zlib.crc32(tag.encode("utf-8"))


def stream(seed: int, tag: str, *index: int) -> np.random.Generator:
    if seed < 0:
        raise ValueError(f"seed must be nonnegative, got {seed}")
    key = (tag_code(tag),) + tuple(int(i) for i in index)
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.PCG64(ss))


def child_seed(rng: np.random.Generator) -> int:
    """Draw a seed for a sub-computation from an existing generator."""
    return int(rng.integers(0, 2**63 - 1))
