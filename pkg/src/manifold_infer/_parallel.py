"""Index-addressed parallel map over replicate indices."""

from __future__ import annotations

import os
from concurrent.futures import ProcessPoolExecutor

import numpy as np
from threadpoolctl import threadpool_limits

ENV_THREADS = "MANIFOLD_INFER_THREADS"


def resolve_threads(threads=None):
    """Worker count: env override, then the argument, then all cores."""
    env = os.environ.get(ENV_THREADS)
    if env:
        try:
            return max(1, int(env))
        except ValueError:
            pass
    if threads is None:
        return max(1, os.cpu_count() or 1)
    return max(1, int(threads))


def _run_chunk(args):
    fn, shared, idx = args
    with threadpool_limits(limits=1):
        return idx, [fn(shared, int(i)) for i in idx]


def index_map(fn, shared, count, threads=None, chunk=None):
    """Evaluate ``fn(shared, i)`` for ``i in range(count)``.

    Results are returned in index order whatever the worker count, so
    output is schedule independent as long as ``fn`` depends only on
    its arguments. ``fn`` and ``shared`` must be picklable when more
    than one worker is used.
    """
    threads = resolve_threads(threads)
    if threads == 1 or count < 2:
        with threadpool_limits(limits=1):
            return [fn(shared, i) for i in range(count)]
    if chunk is None:
        chunk = max(1, count // (4 * threads))
    blocks = [np.arange(s, min(s + chunk, count)) for s in range(0, count, chunk)]
    out = [None] * count
    with ProcessPoolExecutor(max_workers=threads) as ex:
        for idx, res in ex.map(_run_chunk, [(fn, shared, b) for b in blocks]):
            for i, r in zip(idx, res):
                out[int(i)] = r
    return out
