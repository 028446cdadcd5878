"""
Ordered parallel sweeps over independent work items
"""
import logging
from concurrent.futures import ThreadPoolExecutor, as_completed
from typing import Callable, Iterable, List, Optional, TypeVar

from tqdm import tqdm

from ..config import settings

logger = logging.getLogger(__name__)

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(func: Callable[[T], R], items: Iterable[T], max_workers: Optional[int] = None,
                label: str = "sweep", progress: Optional[bool] = None) -> List[R]:
    """Apply func to every item on a thread pool; results come back in input order"""
    items = list(items)
    if not items:
        return []
    workers = max_workers or settings.MAX_WORKERS
    show = settings.SHOW_PROGRESS if progress is None else progress

    if workers <= 1 or len(items) == 1:
        return [func(item) for item in tqdm(items, desc=label, disable=not show)]

    results = []
    with ThreadPoolExecutor(max_workers=min(workers, len(items))) as executor:
        future_to_index = {executor.submit(func, item): idx for idx, item in enumerate(items)}

        for future in tqdm(as_completed(future_to_index), total=len(items), desc=label, disable=not show):
            idx = future_to_index[future]
            try:
                results.append((idx, future.result()))
            except Exception as e:
                logger.error(f"{label}: item {idx} failed: {str(e)}")
                raise

    # Restore input order
    results.sort(key=lambda pair: pair[0])
    return [value for _, value in results]
