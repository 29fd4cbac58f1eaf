"""Worker-pool job execution with deterministic result ordering.

Jobs are argument-free callables that own all of their randomness (streams
derived from structural indices), so running them on any number of workers
yields identical results; outputs are returned in submission order. A failed
job is retried once before its exception surfaces.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from typing import Callable, Sequence, TypeVar

T = TypeVar("T")

LEVELS = ("outer", "batch", "config", "fold", "combined")


def _with_retry(job: Callable[[], T]) -> T:
    try:
        return job()
    except Exception:
        return job()


def run_jobs(jobs: Sequence[Callable[[], T]], workers: int = 1) -> list[T]:
    if workers <= 1 or len(jobs) <= 1:
        return [_with_retry(j) for j in jobs]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [pool.submit(_with_retry, j) for j in jobs]
        return [f.result() for f in futures]
