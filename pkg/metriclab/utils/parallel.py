# metriclab/utils/parallel.py
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable

from ..config import Config


def ordered_map(fn: Callable, items: Iterable, *, workers: int | None = None) -> list:
    """Map ``fn`` over ``items``; results keep input order whatever the worker count."""
    items = list(items)
    count = Config.WORKERS if workers is None else workers
    if count <= 1 or len(items) <= 1:
        return [fn(item) for item in items]
    with ThreadPoolExecutor(max_workers=count) as pool:
        return list(pool.map(fn, items))
