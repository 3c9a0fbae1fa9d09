from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Iterable, TypeVar
import zlib

import numpy as np

from prc_studio.configuration import GlobalConfiguration

T = TypeVar("T")
R = TypeVar("R")


def ordered_map(
    func: Callable[[T], R], items: Iterable[T], threads: int | None = None
) -> list[R]:
    """
    Maps `func` over `items` on a thread pool and returns the results in input order.
    Callers reduce the returned list themselves, so results don't depend on the worker count.
    """
    items = list(items)
    threads = threads or GlobalConfiguration.get_threads()
    if threads <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    with ThreadPoolExecutor(max_workers=min(threads, len(items))) as executor:
        return list(executor.map(func, items))


def _key_to_int(key) -> int:
    if isinstance(key, str):
        return zlib.crc32(key.encode("utf-8"))
    return int(key)


def stream(seed: int, *keys) -> np.random.Generator:
    """Counter-based generator keyed by (seed, *keys). String keys name the purpose of the stream."""
    entropy = [int(seed)] + [_key_to_int(key) for key in keys]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *keys) -> int:
    return int(
        np.random.SeedSequence([int(seed)] + [_key_to_int(k) for k in keys]).generate_state(
            1, dtype=np.uint32
        )[0]
    )


def chunks(n: int, size: int) -> list[slice]:
    return [slice(start, min(start + size, n)) for start in range(0, n, size)]
