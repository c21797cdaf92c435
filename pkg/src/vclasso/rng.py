"""Deterministic generator streams keyed by structured integer tuples.

Every stochastic routine derives its generator from a key like
(master_seed, cell_index, replicate) so parallel and serial execution of
the same work plan draw identical numbers.
"""

from __future__ import annotations

import numpy as np


def rng_from_key(*key: int) -> np.random.Generator:
    entropy = tuple(int(k) for k in key)
    if any(k < 0 for k in entropy):
        raise ValueError(f"seed key components must be nonnegative, got {entropy}")
    return np.random.default_rng(np.random.SeedSequence(entropy))


def alpha_seed_key(alpha: float) -> int:
    """Stable integer encoding of an overdispersion level, +inf included."""
    if np.isinf(alpha):
        return 0
    return int(round(float(alpha) * 1e6)) + 1
