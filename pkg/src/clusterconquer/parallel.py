"""Order-preserving parallel map used by the fitting stages."""
from concurrent.futures import ThreadPoolExecutor


def parallel_map(fn, items, workers: int = 1) -> list:
    """``[fn(x) for x in items]``; output order never depends on scheduling."""
    items = list(items)
    if workers is None or workers <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=workers) as ex:
        return list(ex.map(fn, items))
