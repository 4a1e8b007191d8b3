"""Seedable, splittable random streams.

Every stochastic routine in the package takes ``rng`` as either an integer
seed, a :class:`numpy.random.SeedSequence`, or an existing
:class:`numpy.random.Generator`. Independent shards come from
``SeedSequence.spawn`` so parallel runs never share a stream.
"""

from __future__ import annotations

from typing import Union

import numpy as np

RngLike = Union[None, int, np.random.SeedSequence, np.random.Generator]


def make_rng(rng: RngLike = None) -> np.random.Generator:
    if isinstance(rng, np.random.Generator):
        return rng
    if isinstance(rng, np.random.SeedSequence):
        return np.random.Generator(np.random.PCG64(rng))
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(rng)))


def spawn(rng: RngLike, n: int) -> list[np.random.Generator]:
    """Split ``rng`` into ``n`` independent child generators."""
    if isinstance(rng, np.random.Generator):
        return list(rng.spawn(n))
    seq = rng if isinstance(rng, np.random.SeedSequence) else np.random.SeedSequence(rng)
    return [np.random.Generator(np.random.PCG64(s)) for s in seq.spawn(n)]
