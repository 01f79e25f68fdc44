"""Counter-based random substreams keyed by (seed, path index, stream tag)"""

from typing import Tuple

import numpy as np

# stream tags keep the noise of distinct model parts uncorrelated
STREAM_BROWNIAN = 0
STREAM_VOLATILITY = 1
STREAM_DRIFT = 2
STREAM_BOOTSTRAP = 3
STREAM_PREESTIMATE = 4


def substream(seed: int, path: int, stream: int = STREAM_BROWNIAN, *extra: int) -> np.random.Generator:
    """
    Independent generator for one Monte Carlo path

    A Philox bit generator is keyed from a SeedSequence whose spawn key is
    (path, stream, *extra), so path i draws the same numbers regardless of
    how many paths run or in which order.

    Args:
        seed: Experiment seed
        path: Path index
        stream: Stream tag
        extra: Further key components (e.g. Brownian index m)

    Returns:
        numpy Generator
    """
    key: Tuple[int, ...] = (int(path), int(stream)) + tuple(int(e) for e in extra)
    sequence = np.random.SeedSequence(entropy=int(seed), spawn_key=key)
    return np.random.Generator(np.random.Philox(sequence))
