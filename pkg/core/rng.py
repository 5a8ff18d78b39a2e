"""
Reproducible random streams.

Every sample, trial or ensemble member draws from its own counter-based
Philox stream keyed by (master seed, purpose, index), so results do not
depend on thread count or completion order.
"""

from typing import Tuple

import numpy as np

# Purpose tags keep streams for different consumers disjoint.
PURPOSE_CROSSTALK = 1
PURPOSE_CALIBRATION = 2
PURPOSE_TRIAL = 3
PURPOSE_NULL_TRIAL = 4


def stream_key(seed: int, purpose: int, index: int) -> Tuple[int, Tuple[int, int]]:
    """Return the (entropy, spawn_key) pair that identifies a stream."""
    if seed < 0 or index < 0:
        raise ValueError("seed and index must be non-negative")
    return int(seed), (int(purpose), int(index))


def make_stream(seed: int, purpose: int, index: int) -> np.random.Generator:
    """
    Create the generator for one sample.

    Args:
        seed: Master seed of the run
        purpose: One of the PURPOSE_* tags
        index: Sample or trial index

    Returns:
        A numpy Generator backed by Philox
    """
    entropy, spawn_key = stream_key(seed, purpose, index)
    sequence = np.random.SeedSequence(entropy, spawn_key=spawn_key)
    return np.random.Generator(np.random.Philox(sequence))
