"""
Reproducible random streams for exactmeta.

All randomness flows from one master seed through numpy's SeedSequence into
Philox (counter-based) generators:

    master seed -> per-replicate substream -> per-Monte-Carlo-draw substream

Substream b depends only on (seed, b), never on how many streams exist or on
the order in which they are consumed, so results do not change with the number
of worker threads.
"""
import numpy as np


def philox(seed) -> np.random.Generator:
    """Counter-based generator for a seed or a SeedSequence."""
    if not isinstance(seed, np.random.SeedSequence):
        seed = np.random.SeedSequence(seed)
    return np.random.Generator(np.random.Philox(seed))


def substream(seed: int, index: int) -> np.random.SeedSequence:
    """
    SeedSequence of substream `index` under master `seed`.

    Equivalent to SeedSequence(seed).spawn(n)[index] for any n > index.
    """
    return np.random.SeedSequence(seed, spawn_key=(index,))


def substream_seed(seed: int, index: int) -> int:
    """A 63-bit integer seed derived from substream `index`."""
    state = substream(seed, index).generate_state(1, np.uint64)[0]
    return int(state >> np.uint64(1))


def draw_matrix(seed: int, B: int, dim: int) -> np.ndarray:
    """
    Standard normal draws U^(1..B), one row per replicate.

    Row b comes from its own substream, so the same (seed, B, dim) always gives
    the same matrix and every candidate null value reuses it (common random
    numbers).
    """
    U = np.empty((B, dim))
    for b in range(B):
        U[b] = philox(substream(seed, b)).standard_normal(dim)
    return U
