"""Counter-based random number streams.

Every consumer of randomness receives its own `numpy.random.Generator`
built from a Philox counter keyed by the master seed.  Streams are
addressed by (lane, iteration, worker), so results never depend on the
order in which workers or seeds execute.
"""
from __future__ import annotations

import numpy as np

# Lane values keep unrelated consumers (training workers, offline
# estimators, dataset generation) on disjoint counter ranges.
LANE_WORKER = 0
LANE_ORACLE = 1
LANE_ENSEMBLE = 2


def stream(seed: int, lane: int, iteration: int, worker: int) -> np.random.Generator:
    """Return the generator for one (lane, iteration, worker) address."""
    bitgen = np.random.Philox(key=seed, counter=[0, lane, iteration, worker])
    return np.random.Generator(bitgen)


def worker_stream(seed: int, iteration: int, worker: int) -> np.random.Generator:
    """Per-(iteration, worker) substream used for batch sampling."""
    return stream(seed, LANE_WORKER, iteration, worker)
