"""Order-preserving parallel map used by ingestion and batch inference."""

from __future__ import annotations

import functools
import multiprocessing
from concurrent.futures import ProcessPoolExecutor


def map_ordered(fn, items, workers: int = 1, **fixed_kwargs) -> list:
    """Apply ``fn(item, **fixed_kwargs)`` to every item.

    Results come back in input order regardless of ``workers``, so a
    multi-worker run is indistinguishable from a sequential one.
    """
    if workers < 1:
        raise ValueError(f"workers must be >= 1, got {workers}")
    bound = functools.partial(fn, **fixed_kwargs) if fixed_kwargs else fn
    items = list(items)
    if workers == 1 or len(items) < 2:
        return [bound(item) for item in items]
    chunksize = max(1, len(items) // (workers * 4))
    ctx = multiprocessing.get_context("fork")
    with ProcessPoolExecutor(max_workers=workers, mp_context=ctx) as pool:
        return list(pool.map(bound, items, chunksize=chunksize))
