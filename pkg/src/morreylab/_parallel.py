"""Thread fan-out with order-preserving results.

Reductions are always done by the caller over the returned list, in input
order, so results never depend on the thread count.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "MORREYLAB_THREADS"


def thread_count(requested: int | None = None) -> int:
    """Worker count: explicit request, else $MORREYLAB_THREADS, else CPU count.

    The environment variable is a cap on whatever is requested.
    """
    cap = os.environ.get(ENV_THREADS)
    cap_n = int(cap) if cap and cap.strip() else None
    n = requested if requested is not None else (cap_n or os.cpu_count() or 1)
    if cap_n is not None:
        n = min(n, cap_n)
    return max(1, int(n))


def ordered_map(fn: Callable[[T], R], items: Iterable[T], threads: int | None = None) -> list[R]:
    items = list(items)
    workers = min(thread_count(threads), len(items)) if items else 1
    if workers <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
