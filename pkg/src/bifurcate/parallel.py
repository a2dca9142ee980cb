"""Worker pool helper honouring the BIFURCATE_THREADS cap."""
from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")
R = TypeVar("R")

ENV_VAR = "BIFURCATE_THREADS"


def worker_count(requested: int | None = None) -> int:
    """Requested workers, capped by ``BIFURCATE_THREADS``; defaults to 1."""
    raw = os.environ.get(ENV_VAR, "").strip()
    cap = None
    if raw:
        try:
            cap = int(raw)
        except ValueError:
            raise ValueError(f"{ENV_VAR} must be an integer, got {raw!r}") from None
    n = requested if requested is not None else (cap or 1)
    if cap is not None:
        n = min(n, cap)
    return max(1, n)


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int | None = None) -> list[R]:
    """Order-preserving map; runs in-process when only one worker is allowed."""
    n = worker_count(workers)
    if n == 1 or len(items) < 2:
        return [fn(it) for it in items]
    chunk = max(1, len(items) // (4 * n))
    with ProcessPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items, chunksize=chunk))
