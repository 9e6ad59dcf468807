"""Bounded thread pool shared by the per-position and per-image loops."""
import os
from concurrent.futures import ThreadPoolExecutor


def max_workers() -> int:
    """Worker cap from ``EIGENSR_THREADS`` (default: CPU count)."""
    raw = os.environ.get("EIGENSR_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def pmap(fn, items):
    """Order-preserving map over ``items``; runs inline with a single worker."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
