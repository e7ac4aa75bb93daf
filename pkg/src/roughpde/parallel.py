"""
Thread-pool fan-out for per-sample pipelines.

Results come back in index order and sums are reduced with a fixed pairwise
tree, so totals do not depend on scheduling or on the worker count.

Environment Variables:
- ROUGHPDE_WORKERS: Worker threads (default: physical core count)
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, List, Optional, Sequence, TypeVar

import psutil

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    configured = os.getenv("ROUGHPDE_WORKERS")
    if configured:
        workers = int(configured)
        if workers < 1:
            raise ValueError(f"ROUGHPDE_WORKERS must be positive, got {configured}")
        return workers
    return psutil.cpu_count(logical=False) or os.cpu_count() or 1


def map_ordered(func: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> List[R]:
    """Apply func to every item on a thread pool; results in input order."""
    items = list(items)
    workers = workers or default_workers()
    if workers == 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(func, items))


def map_samples(func: Callable[[int], R], n_samples: int, workers: Optional[int] = None) -> List[R]:
    """func(sample_index) for sample_index = 0..n_samples-1."""
    return map_ordered(func, range(n_samples), workers)


def pairwise_sum(values: Sequence):
    """Sum by a balanced binary tree over the sequence order."""
    if len(values) == 0:
        raise ValueError("pairwise_sum of an empty sequence")
    level = list(values)
    while len(level) > 1:
        paired = [level[i] + level[i + 1] for i in range(0, len(level) - 1, 2)]
        if len(level) % 2:
            paired.append(level[-1])
        level = paired
    return level[0]


def pairwise_mean(values: Sequence):
    return pairwise_sum(values) / len(values)
