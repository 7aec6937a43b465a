"""Thread pool shared by the solvers, cross-validation and the studies."""

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, List, Optional, Sequence, TypeVar

from ghostkit.errors import ConfigError
from ghostkit.tensor.tape import get_precision, precision

THREADS_ENV = "GHOSTKIT_THREADS"

T = TypeVar("T")
R = TypeVar("R")


def resolve_workers(requested: Optional[int] = None) -> int:
    """Pool size: the explicit request, else ``GHOSTKIT_THREADS``, else 1."""
    if requested is None:
        raw = os.environ.get(THREADS_ENV, "1")
        try:
            requested = int(raw)
        except ValueError:
            raise ConfigError(f"{THREADS_ENV} must be an integer, got '{raw}'") from None
    if requested < 1:
        raise ConfigError(f"worker count must be at least 1, got {requested}")
    return requested


def parallel_map(fn: Callable[[T], R], items: Sequence[T], workers: int = 1) -> List[R]:
    """Apply ``fn`` to every item; results keep the order of ``items``.

    Worker threads inherit the caller's tensor precision.
    """
    items = list(items)
    if workers <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    current = get_precision()

    def run(item: T) -> R:
        with precision(current):
            return fn(item)

    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as pool:
        return list(pool.map(run, items))
