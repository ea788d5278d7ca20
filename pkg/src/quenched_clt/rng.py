"""Keyed counter-based random streams and order-preserving task execution.

Every random draw in the package comes from a Philox generator keyed by the
tuple ``(master_seed, realization, stream)``.  The key fixes the stream
completely, so results never depend on how work is scheduled.
"""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence

import numpy as np

# stream identifiers (the third component of the key tuple)
STREAM_OMEGA = 0
STREAM_ENSEMBLE = 1
STREAM_MONTE_CARLO = 2


def keyed_generator(seed: int, realization: int = 0, stream: int = 0) -> np.random.Generator:
    """Return the generator for ``(seed, realization, stream)``."""
    if seed is None:
        raise ValueError("a master seed is mandatory")
    ss = np.random.SeedSequence(entropy=int(seed), spawn_key=(int(realization), int(stream)))
    return np.random.Generator(np.random.Philox(ss))


def map_ordered(fn: Callable, tasks: Sequence, workers: int = 1) -> list:
    """Apply ``fn`` to every task and return results in task order.

    With ``workers > 1`` the tasks run in a process pool; ``fn`` and the tasks
    must then be picklable.  Results are always returned sorted by task
    position so downstream reductions see a fixed summation order.
    """
    tasks = list(tasks)
    if workers < 1:
        raise ValueError("worker count must be >= 1")
    if workers == 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=max(1, len(tasks) // (4 * workers))))

