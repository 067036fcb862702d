"""Small shared helpers."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, threads: int | None = None) -> list:
    """Map with an optional thread pool, results always in input order.

    Each item is computed independently, so the output is bit-identical
    for any thread count (numpy releases the GIL on array ops).
    """
    items = list(items)
    if threads is None:
        threads = os.cpu_count() or 1
    if threads <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def resolve_seed(seed: int | None, default: int = 0) -> int:
    """Explicit seed, else the PANSR_SEED environment fallback, else default."""
    if seed is not None:
        return int(seed)
    env = os.environ.get("PANSR_SEED")
    if env is not None:
        return int(env)
    return default
