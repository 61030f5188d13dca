"""Counter-based uniform random streams.

A stream is a 64-bit key; its k-th draw is the SplitMix64 output at
position k. Any draw can be computed directly from (key, k), so splitting
work across threads never changes the numbers produced.
"""

from __future__ import annotations

import hashlib
import os
from concurrent.futures import ThreadPoolExecutor
from typing import Callable

import numpy as np

_GAMMA = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_TO_UNIT = 2.0 ** -53

CHUNK = 1 << 16
THREADS_ENV = "OBJECTIVEQM_THREADS"


def stream_key(seed: int, *tags) -> np.uint64:
    """Derive a stream key from a master seed and any number of tags."""
    payload = repr((int(seed),) + tuple(str(t) for t in tags)).encode()
    return np.uint64(int.from_bytes(hashlib.blake2b(payload, digest_size=8).digest(), "little"))


def _mix(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def uniforms(key: np.uint64, counters: np.ndarray) -> np.ndarray:
    """Uniform doubles in [0, 1) at positions ``counters`` of stream ``key``."""
    c = np.asarray(counters, dtype=np.uint64)
    z = np.uint64(key) + (c + np.uint64(1)) * _GAMMA
    return (_mix(z) >> np.uint64(11)).astype(np.float64) * _TO_UNIT


def worker_count() -> int:
    raw = os.environ.get(THREADS_ENV, "")
    try:
        n = int(raw)
    except ValueError:
        n = os.cpu_count() or 1
    return max(1, n)


def map_chunks(fn: Callable[[int, int], np.ndarray], n: int, workers: int | None = None) -> list:
    """Apply ``fn(start, stop)`` over fixed-size chunks of ``range(n)``.

    Chunk boundaries depend only on ``n``; the worker count only changes
    scheduling.
    """
    bounds = [(s, min(s + CHUNK, n)) for s in range(0, n, CHUNK)]
    workers = worker_count() if workers is None else workers
    if workers <= 1 or len(bounds) <= 1:
        return [fn(s, e) for s, e in bounds]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda se: fn(*se), bounds))
