"""
Order-preserving map over a process pool with a tqdm progress bar.
"""

from concurrent.futures import ProcessPoolExecutor
from typing import Callable, List, Sequence, TypeVar

from tqdm import tqdm

T = TypeVar("T")
R = TypeVar("R")


def parallel_map(func: Callable[[T], R], items: Sequence[T], workers: int = 1, description: str = "") -> List[R]:
    """
    Apply ``func`` to every item. Results come back in input order, so the
    output does not depend on ``workers``; ``func`` must be picklable when
    ``workers > 1``.
    """
    progress = dict(total=len(items), desc=description, disable=None, leave=False)
    if workers <= 1 or len(items) <= 1:
        return [func(item) for item in tqdm(items, **progress)]
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return list(tqdm(pool.map(func, items), **progress))
