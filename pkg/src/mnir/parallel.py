"""Order-preserving map over a bounded process pool."""
from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor


def ordered_map(func, items, workers=1, chunksize=None):
    """Apply ``func`` to every item and return results in input order.

    ``func`` must be picklable and pure; with ``workers <= 1`` everything
    runs in-process, so the result never depends on the pool size.
    """
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    workers = min(int(workers), len(items))
    if chunksize is None:
        chunksize = max(1, len(items) // (4 * workers))
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(func, items, chunksize=chunksize))
