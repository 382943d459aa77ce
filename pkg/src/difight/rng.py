"""Seed plumbing shared by the simulation modules."""
import numpy as np


def seed_sequence(seed) -> np.random.SeedSequence:
    if isinstance(seed, np.random.SeedSequence):
        return seed
    return np.random.SeedSequence(seed)


def child_seeds(seed, n: int) -> list:
    """Children of ``seed`` derived from its key alone.

    Unlike ``SeedSequence.spawn`` this is stateless, so passing the same
    seed object twice yields the same streams.
    """
    s = seed_sequence(seed)
    return [np.random.SeedSequence(s.entropy, spawn_key=s.spawn_key + (i,),
                                   pool_size=s.pool_size) for i in range(n)]
