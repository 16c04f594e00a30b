"""Order-preserving task map over a process pool."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, TypeVar

T = TypeVar("T")
R = TypeVar("R")


def default_workers() -> int:
    return max(1, os.cpu_count() or 1)


def pmap(fn: Callable[[T], R], tasks: Iterable[T], workers: int = 1, chunksize: int = 1) -> list[R]:
    """``[fn(t) for t in tasks]``, optionally spread over ``workers`` processes.

    Results come back in task order, so any reduction over them is
    independent of the worker count.  ``fn`` must be picklable.
    """
    tasks = list(tasks)
    if workers <= 1 or len(tasks) <= 1:
        return [fn(t) for t in tasks]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, tasks, chunksize=chunksize))
