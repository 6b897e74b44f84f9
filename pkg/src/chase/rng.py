"""Named, counter-based random streams.

Every stochastic stage draws from its own Philox stream derived from
``(seed, stream name, *keys)`` so stages can be reseeded independently and
parallel execution reproduces serial execution bit for bit.

Streams
-------
data      dataset-level draws (regime/stratum assignment, fixed splits)
pairs     per matched pair simulation, keyed by pair id
init      parameter initialisation, keyed by model role
dropout   dropout mask stream, keyed by model role and step / MC pass
sampling  mini-batch shuffling, keyed by model role
ranking   pair subsampling in the ranking loss
folds     cross-validation fold assignment
"""

from __future__ import annotations

import zlib

import numpy as np

STREAMS = {
    "data": 0,
    "pairs": 1,
    "init": 2,
    "dropout": 3,
    "sampling": 4,
    "ranking": 5,
    "folds": 6,
}


def _key_to_int(key: int | str) -> int:
    if isinstance(key, (int, np.integer)):
        if key < 0:
            raise ValueError(f"Stream keys must be non-negative, got {key}.")
        return int(key)
    return zlib.crc32(str(key).encode("utf-8"))


def stream(seed: int, name: str, *keys: int | str) -> np.random.Generator:
    """Return an independent generator for ``name`` under ``seed``."""

    if name not in STREAMS:
        raise KeyError(f"Unknown RNG stream '{name}'; expected one of {sorted(STREAMS)}.")
    spawn_key = (STREAMS[name], *(_key_to_int(key) for key in keys))
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))


def derive_seed(seed: int, name: str, *keys: int | str) -> int:
    """Integer seed for libraries that only accept ints (e.g. scikit-learn)."""

    return int(stream(seed, name, *keys).integers(0, 2**31 - 1))
