"""Deterministic chunked Monte-Carlo driving.

Work is split into fixed-size chunks; each chunk gets an independent
generator spawned from the master seed, and results are combined in chunk
order.  The output is therefore identical for any worker count: threads
change wall-clock time, never the numbers.  EWENS_STEIN_THREADS caps the
worker pool.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

import numpy as np

__all__ = ["worker_count", "map_chunks", "sample_statistic_batch"]

DEFAULT_CHUNK = 65_536

T = TypeVar("T")


def worker_count() -> int:
    env = os.environ.get("EWENS_STEIN_THREADS")
    if env:
        return max(1, int(env))
    return min(os.cpu_count() or 1, 8)


def map_chunks(
    total: int,
    fn: Callable[[np.random.Generator, int], T],
    seed,
    chunk_size: int = DEFAULT_CHUNK,
) -> list[T]:
    """Run fn(rng, count) over chunks summing to total; results in chunk order.

    Each chunk's generator is spawned from SeedSequence(seed), so the
    partition — and hence every number produced — depends only on
    (total, seed, chunk_size), never on scheduling.
    """
    if total <= 0:
        return []
    counts = [chunk_size] * (total // chunk_size)
    if total % chunk_size:
        counts.append(total % chunk_size)
    seq = seed if isinstance(seed, np.random.SeedSequence) else np.random.SeedSequence(seed)
    children = seq.spawn(len(counts))
    workers = min(worker_count(), len(counts))
    if workers == 1:
        return [fn(np.random.default_rng(c), k) for c, k in zip(children, counts)]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(
            pool.map(lambda arg: fn(np.random.default_rng(arg[0]), arg[1]), zip(children, counts))
        )


def sample_statistic_batch(A, params, total: int, seed) -> np.ndarray:
    """total draws of Y = sum_i a_hat[i, pi(i)] under CRP sampling."""
    from .ewens import sample_crp_images

    centered = A.centered
    rows = np.arange(params.n)

    def chunk(rng: np.random.Generator, count: int) -> np.ndarray:
        images = sample_crp_images(params, rng, count)
        return centered[rows[None, :], images - 1].sum(axis=1)

    parts = map_chunks(total, chunk, seed)
    return np.concatenate(parts) if parts else np.empty(0)
