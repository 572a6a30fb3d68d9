"""Named, splittable random substreams.

Every stochastic operation in the package draws from a Philox
(counter-based) generator keyed by a master seed plus a path of names,
so any run is replayable from the recorded master seed and substream
names alone, and per-member sampling can be parallelized safely.
"""

import hashlib

import numpy as np

__all__ = ["substream"]


def _path_words(path: tuple) -> list[int]:
    """Hash a substream path to four stable 32-bit words.

    Uses sha256 of the repr-joined path; stable across processes and
    platforms (unlike built-in hash()).
    """
    text = "/".join(repr(p) for p in path)
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return [int.from_bytes(digest[4 * i : 4 * i + 4], "little") for i in range(4)]


def substream(master_seed: int, *path) -> np.random.Generator:
    """Return a Generator for the substream named by `path`.

    Identical (master_seed, path) always yields an identical stream;
    different paths are statistically independent. Path components may
    be strings or integers (e.g. substream(seed, "noise", trace_index)).
    """
    if master_seed < 0:
        raise ValueError("master seed must be non-negative")
    entropy = [int(master_seed)] + _path_words(tuple(path))
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
