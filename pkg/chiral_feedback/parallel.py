import logging
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Iterable, List, TypeVar

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(fn: Callable[[T], R], items: Iterable[T], threads: int = 1) -> List[R]:
    """Map ``fn`` over ``items`` keeping input order; runs inline for a single worker."""
    items = list(items)
    if threads <= 1 or len(items) <= 1:
        return [fn(item) for item in items]

    workers = min(threads, len(items))
    logger.info(f"Dispatching {len(items)} task(s) to {workers} worker process(es)")
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(fn, items))
