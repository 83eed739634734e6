"""Worker-count control for internally parallel operations.

``OARECO_THREADS`` caps the number of worker threads; computations partition
work so that results are bitwise identical for every worker count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

ENV_VAR = "OARECO_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Resolve the worker count: explicit argument, else env var, else 1."""
    if requested is not None:
        value = int(requested)
    else:
        raw = os.environ.get(ENV_VAR)
        value = int(raw) if raw else 1
    if value < 1:
        raise ValueError(f"worker count must be >= 1, got {value}")
    return value


def run_row_blocks(fn, n_rows: int, workers: int | None = None) -> None:
    """Call ``fn(start, stop)`` over a partition of ``range(n_rows)``.

    Each block writes disjoint output rows, so the partition cannot change
    the result; with one worker the call is inlined.
    """
    workers = min(worker_count(workers), n_rows) if n_rows else 1
    if workers <= 1:
        fn(0, n_rows)
        return
    bounds = [round(i * n_rows / workers) for i in range(workers + 1)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(fn, start, stop)
            for start, stop in zip(bounds[:-1], bounds[1:])
            if stop > start
        ]
        for future in futures:
            future.result()
