"""Deterministic chunked map over path indices.

Work is split into fixed-size chunks of path indices, independent of the
worker count; per-chunk results are combined in chunk order. Together with
per-path derived streams this makes every estimator bit-identical for any
number of workers.
"""

from __future__ import annotations

from concurrent.futures import ProcessPoolExecutor

CHUNK_SIZE = 256


def chunk_ranges(n_items, chunk_size=CHUNK_SIZE):
    return [(i, min(i + chunk_size, n_items)) for i in range(0, n_items, chunk_size)]


def map_chunks(fn, args, n_items, threads=1, chunk_size=CHUNK_SIZE):
    """Apply fn(args, start, stop) over fixed chunks, results in chunk order.

    fn must be a module-level function and args picklable when threads > 1.
    """
    ranges = chunk_ranges(n_items, chunk_size)
    if threads is None or threads <= 1 or len(ranges) <= 1:
        return [fn(args, a, b) for a, b in ranges]
    with ProcessPoolExecutor(max_workers=int(threads)) as pool:
        futures = [pool.submit(fn, args, a, b) for a, b in ranges]
        return [f.result() for f in futures]
