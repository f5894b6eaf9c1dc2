"""Deterministic worker-pool mapping for embarrassingly parallel steps."""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_THREADS = "HIERSEARCH_THREADS"


def default_threads() -> int:
    """Worker cap from the environment, 1 when unset or unparseable."""
    raw = os.environ.get(ENV_THREADS, "")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def map_workers(fn: Callable[[T], R], items: Sequence[T], threads: int = 1) -> list[R]:
    """Apply ``fn`` to every item, preserving input order in the result.

    With ``threads`` > 1 the work runs on a thread pool; numpy releases the
    GIL inside BLAS calls, which is where the time goes. Results are always
    collected in submission order, so the output is independent of scheduling.
    """
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))
