"""Thread pool helper honoring the DUALKIT_THREADS environment variable."""

import os
from concurrent.futures import ThreadPoolExecutor


def thread_count():
    raw = os.environ.get("DUALKIT_THREADS", "1")
    try:
        n = int(raw)
    except ValueError:
        raise ValueError(f"DUALKIT_THREADS must be an integer, got {raw!r}")
    return max(1, n)


def ordered_map(fn, items):
    """Map preserving order; uses threads only when more than one is allowed.

    Results are combined in input order, so the outcome does not depend on
    the thread count.
    """
    items = list(items)
    n = thread_count()
    if n <= 1 or len(items) <= 1:
        return [fn(x) for x in items]
    with ThreadPoolExecutor(max_workers=min(n, len(items))) as pool:
        return list(pool.map(fn, items))
