"""Chunked evaluation over element groups, optionally on a thread pool.

``POLYAFEM_THREADS`` caps the number of worker threads (default 1).  Results
come back in submission order, so reductions stay deterministic.
"""

import os
from concurrent.futures import ThreadPoolExecutor

import numpy as np

CHUNK = 1024


def n_threads():
    try:
        return max(1, int(os.environ.get("POLYAFEM_THREADS", "1")))
    except ValueError:
        return 1


def chunks(ids, size=CHUNK):
    ids = np.asarray(ids)
    return [ids[i : i + size] for i in range(0, len(ids), size)]


def ordered_map(func, items):
    items = list(items)
    k = n_threads()
    if k == 1 or len(items) <= 1:
        return [func(x) for x in items]
    with ThreadPoolExecutor(max_workers=k) as pool:
        return list(pool.map(func, items))


def element_chunks(mesh):
    """``(n, ids)`` work items covering every element once."""
    return [(n, c) for n, ids in mesh.size_groups.items() for c in chunks(ids)]
