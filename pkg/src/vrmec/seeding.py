"""Named random sub-streams derived from one top-level seed.

Every consumer asks for its own generator by label (plus optional integer
indices such as episode and slot).  Because the label is hashed into the
seed sequence, renaming one label only changes the draws of that consumer.
"""

from __future__ import annotations

import zlib

import numpy as np

TOPOLOGY = "topology"
MOBILITY = "mobility"
CHANNEL = "channel"
PREDICTOR_DATA = "predictor-data"
PREDICTOR_INIT = "predictor-init"
AGENT_INIT = "agent-init"
EXPLORATION = "exploration"
REPLAY = "replay"


def label_key(label: str) -> int:
    return zlib.crc32(label.encode("utf-8"))


def stream(seed: int, label: str, *indices: int) -> np.random.Generator:
    """Independent generator for ``(seed, label, *indices)``."""
    if seed < 0:
        raise ValueError("seed must be non-negative")
    entropy = [int(seed), label_key(label), *(int(i) for i in indices)]
    return np.random.default_rng(np.random.SeedSequence(entropy))
