"""Small shared helpers: worker-count resolution and deterministic parallel map."""
from __future__ import annotations

import multiprocessing
import os


def resolve_workers(n_workers: int | None = None) -> int:
    """Number of worker processes: explicit value, else CDML_THREADS, else all cores."""
    if n_workers is not None:
        return max(1, int(n_workers))
    env = os.environ.get("CDML_THREADS")
    if env:
        return max(1, int(env))
    return os.cpu_count() or 1


def parallel_map(fn, items, n_workers: int) -> list:
    """Map `fn` over `items`, preserving order.

    Results are identical for every worker count: each item is self-contained
    (it carries its own seed material) and outputs are collected in input order.
    """
    items = list(items)
    if n_workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    ctx = multiprocessing.get_context("fork")
    with ctx.Pool(processes=min(n_workers, len(items))) as pool:
        return pool.map(fn, items)
