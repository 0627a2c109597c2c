"""Counter-based random streams keyed by ``(seed, stream index)``.

Philox is a counter-based generator: the stream for a given key does not
depend on how many other streams were consumed before it, so chunked Monte
Carlo is reproducible regardless of scheduling or worker count.
"""
from __future__ import annotations

import os

import numpy as np

SEED_ENV = "RENEWALAB_SEED"


def stream(seed: int, index: int = 0) -> np.random.Generator:
    ss = np.random.SeedSequence(int(seed) & 0xFFFFFFFFFFFFFFFF, spawn_key=(int(index),))
    return np.random.Generator(np.random.Philox(ss))


def resolve_seed(explicit: int | None = None, configured: int | None = None, default: int = 0) -> int:
    """Seed precedence: explicit (command line), then environment, then config, then default."""
    if explicit is not None:
        return int(explicit)
    env = os.environ.get(SEED_ENV)
    if env not in (None, ""):
        try:
            return int(env)
        except ValueError as exc:
            raise ValueError(f"{SEED_ENV} must be an integer, got {env!r}") from exc
    return default if configured is None else int(configured)
