"""Seeded, splittable random streams.

Every stochastic routine takes an explicit integer seed. Streams are derived
from ``numpy.random.SeedSequence`` so that work split into chunks (or across
threads) draws from the same numbers regardless of how it is scheduled.
"""

from __future__ import annotations

from typing import List, Union

import numpy as np

from rdpbridge.errors import ParameterError

SeedLike = Union[int, np.random.SeedSequence]


def seed_sequence(seed: SeedLike) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    if isinstance(seed, (bool, np.bool_)) or int(seed) != seed or seed < 0:
        raise ParameterError(f"seed must be a non-negative integer, got {seed!r}")
    return np.random.SeedSequence(int(seed))


def make_rng(seed: SeedLike) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(seed_sequence(seed)))


def split(seed: SeedLike, k: int) -> List[np.random.SeedSequence]:
    """Return ``k`` independent child sequences of ``seed``.

    Child ``i`` depends only on ``(seed, i)``, never on ``k``.
    """
    return seed_sequence(seed).spawn(k) if k > 0 else []


def child(seed: SeedLike, index: int) -> np.random.SeedSequence:
    """Child ``index`` of ``seed`` without materialising its siblings."""
    base = seed_sequence(seed)
    return np.random.SeedSequence(base.entropy, spawn_key=base.spawn_key + (index,))
