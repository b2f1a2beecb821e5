"""Deterministic parallel map.

Work items carry their own random streams, so execution order cannot leak
into the results; the reduction happens in submission order regardless of
completion order.  With threads == 1 everything runs inline.  Output is
therefore byte-identical across thread counts.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads=1):
    """[fn(item) for item in items], optionally on a thread pool.

    Results always come back in the order of `items`.
    """
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=int(threads)) as pool:
        futures = [pool.submit(fn, it) for it in items]
        return [f.result() for f in futures]
