from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, Optional, TypeVar

T = TypeVar("T")
R = TypeVar("R")

_workers: int = 1


def set_workers(n: Optional[int]) -> None:
    """Default pool size for batched evaluations (1 = serial)."""
    global _workers
    _workers = max(1, int(n or 1))


def pmap(fn: Callable[[T], R], items: Iterable[T], workers: Optional[int] = None) -> list[R]:
    """Order-preserving map; the numeric kernels release the GIL."""
    items = list(items)
    n = _workers if workers is None else max(1, int(workers))
    if n == 1 or len(items) < 2:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as ex:
        return list(ex.map(fn, items))
