"""Deterministic thread-pool helper.

Work is split into chunks whose boundaries depend only on the input
length, never on the thread count, and results are joined in input
order.  Combined with per-item kernels this makes outputs independent
of ``threads``.
"""

from concurrent.futures import ThreadPoolExecutor

DEFAULT_CHUNK = 16


def map_chunks(func, items, threads=1, chunk=DEFAULT_CHUNK):
    """Apply ``func`` to consecutive slices of ``items`` and concatenate.

    ``func`` receives a list slice and must return a list (or any
    sequence) of per-item results.
    """
    items = list(items)
    slices = [items[i:i + chunk] for i in range(0, len(items), chunk)]
    if threads is None or threads <= 1 or len(slices) <= 1:
        parts = [func(s) for s in slices]
    else:
        with ThreadPoolExecutor(max_workers=int(threads)) as pool:
            parts = list(pool.map(func, slices))
    out = []
    for p in parts:
        out.extend(p)
    return out
