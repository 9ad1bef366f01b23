"""Counter-based random streams.

Every stochastic operation draws from a Philox stream keyed by the global
seed and a (step, substep, cell) counter, so results do not depend on cell
iteration order and parallel-by-cell execution would reproduce the
single-threaded run bit for bit.
"""

from __future__ import annotations

import numpy as np

# substep tags keep streams of different operations disjoint
INIT = 0
COLLIDE_COARSE = 1
COLLIDE_FD = 2
DELTA_M = 3
THIN = 4
SPAWN = 5
RESAMPLE_DEV = 6
RESAMPLE_COARSE = 7
DSMC = 8


def stream(seed: int, step: int = 0, substep: int = 0, cell: int = 0) -> np.random.Generator:
    """Independent generator for (seed; step, substep, cell)."""
    bg = np.random.Philox(key=np.uint64(seed) & np.uint64(0xFFFFFFFFFFFFFFFF),
                          counter=[0, np.uint64(step), np.uint64(substep), np.uint64(cell)])
    return np.random.Generator(bg)
