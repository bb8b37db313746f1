import os
from concurrent.futures import ThreadPoolExecutor

ENV_THREADS = "CONSGRAPH_THREADS"


def worker_count():
    try:
        n = int(os.environ.get(ENV_THREADS, "1"))
    except ValueError:
        n = 1
    return max(1, n)


def ordered_map(fn, items):
    """``list(map(fn, items))``, spread over ``CONSGRAPH_THREADS`` workers.

    Results keep input order so any reduction over them stays deterministic.
    """
    items = list(items)
    n = min(worker_count(), len(items))
    if n <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=n) as pool:
        return list(pool.map(fn, items))
