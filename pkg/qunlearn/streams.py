"""Counter-based random streams keyed by (seed, label path)."""
import zlib

import numpy as np


def _key(label):
    if isinstance(label, str):
        return zlib.crc32(label.encode('utf-8'))
    return int(label) & 0xFFFFFFFF


def stream(seed, *labels) -> np.random.Generator:
    """
    Return an independent generator for ``seed`` and a label path.

    The same (seed, labels) always yields the same sequence, whatever else
    has been drawn in the process.
    """
    entropy = [int(seed) & 0xFFFFFFFF, *(_key(label) for label in labels)]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))
