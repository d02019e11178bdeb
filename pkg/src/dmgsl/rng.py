"""Named deterministic random substreams.

Every random draw in the package flows from a user seed through a named
substream, so components (init, augmentation, split, ...) can be reordered
or skipped without perturbing each other's streams.
"""
from __future__ import annotations

import zlib

import numpy as np


def substream(seed: int, name: str) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), zlib.crc32(name.encode("utf-8"))]))
