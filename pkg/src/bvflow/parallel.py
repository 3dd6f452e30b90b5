"""Deterministic fan-out helper; BVFLOW_THREADS caps the worker count."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor


def max_workers():
    raw = os.environ.get("BVFLOW_THREADS", "")
    try:
        n = int(raw)
    except ValueError:
        n = 1
    return max(n, 1)


def ordered_map(fn, items):
    """map(fn, items) with results in input order, using up to BVFLOW_THREADS threads."""
    items = list(items)
    n = min(max_workers(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
