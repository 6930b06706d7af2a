"""Named deterministic RNG streams.

Every random draw in the package flows from a single integer seed through a
stream labelled by stage (and optionally iteration / sample index), so results
are reproducible and independent of evaluation order or thread count.
"""

from __future__ import annotations

import zlib

import numpy as np


def _label_entropy(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, *labels: object) -> np.random.Generator:
    """Generator for the stream named by ``labels`` under ``seed``.

    Integer labels are used as-is; strings are hashed. The same
    (seed, labels) always yields the same generator state.
    """
    entropy = [int(seed) & 0xFFFFFFFF]
    for lab in labels:
        if isinstance(lab, (int, np.integer)):
            entropy.append(int(lab) & 0xFFFFFFFF)
        else:
            entropy.append(_label_entropy(str(lab)))
    return np.random.default_rng(np.random.SeedSequence(entropy))
