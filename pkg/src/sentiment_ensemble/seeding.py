"""Seeded random generators.

Every random draw in the package comes from a
``numpy.random.Generator`` backed by the PCG64 bit generator, so results are
reproducible across runs and platforms for a fixed integer seed.
"""

import numpy as np


def make_rng(seed: int) -> np.random.Generator:
    """Build a PCG64-backed generator from an integer seed."""
    return np.random.Generator(np.random.PCG64(seed))


def spawn_seeds(seed: int, count: int) -> list[int]:
    """Derive ``count`` independent child seeds from ``seed``.

    Parameters
    ----------
    seed : int
        Parent seed.
    count : int
        Number of child seeds.

    Returns
    -------
    list of int
        Child seeds, stable for a given ``(seed, count)``.
    """
    children = np.random.SeedSequence(seed).spawn(count)
    return [int(child.generate_state(1, dtype=np.uint32)[0]) for child in children]
