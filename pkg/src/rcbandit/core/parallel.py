"""Ordered fan-out of independent replications."""

from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm

from rcbandit.core.logger_setup import get_logger

logger = get_logger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def map_ordered(fn: Callable[[T], R], items: Sequence[T], workers: int = 1, desc: str = "Replications") -> List[R]:
    """Apply ``fn`` to every item and return results in input order.

    With ``workers > 1`` items run in a process pool; ``fn`` and the items must
    then be picklable.
    """
    results: List[R] = [None] * len(items)  # type: ignore[list-item]
    with tqdm(total=len(items), desc=desc, unit="run", ncols=100) as pbar:
        if workers <= 1 or len(items) <= 1:
            for index, item in enumerate(items):
                results[index] = fn(item)
                pbar.update(1)
            return results

        logger.info(f"Running {len(items)} jobs on {workers} worker processes")
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = {executor.submit(fn, item): index for index, item in enumerate(items)}
            for future in as_completed(futures):
                results[futures[future]] = future.result()
                pbar.update(1)
    return results
