"""Counter-based random streams keyed by (seed, round, device, purpose).

Each consumer derives its own generator from a key path, so results do not
depend on execution order: parallel and serial runs of the same scenario
draw identical randomness.
"""

from __future__ import annotations

import zlib

import numpy as np


def _to_int(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode("utf-8"))
    return int(part)


def substream(*key) -> np.random.Generator:
    """Generator for a key path of ints and strings.

    Philox is counter-based: streams for distinct keys are independent and
    reproducible across platforms.
    """
    parts = tuple(_to_int(p) for p in key)
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(parts)))
