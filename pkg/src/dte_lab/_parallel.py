"""Thread-pool helper with deterministic, index-slotted result handling."""
from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor

from .errors import ConfigError


def thread_count() -> int:
    """Worker cap: DTE_LAB_THREADS when set, else min(cpu count, 8)."""
    raw = os.environ.get("DTE_LAB_THREADS", "").strip()
    if raw:
        try:
            v = int(raw)
        except ValueError:
            raise ConfigError(f"DTE_LAB_THREADS must be an integer, got {raw!r}") from None
        return max(1, v)
    return min(os.cpu_count() or 1, 8)


def run_indexed(tasks) -> None:
    """Run no-arg callables that each write to their own output slot.

    Scheduling never affects results because slots are disjoint; when
    tasks fail, the exception raised is the first in task order, so
    failures too are deterministic under parallelism.
    """
    workers = thread_count()
    if workers <= 1 or len(tasks) <= 1:
        for t in tasks:
            t()
        return
    with ThreadPoolExecutor(max_workers=workers) as ex:
        futures = [ex.submit(t) for t in tasks]
        errors = [f.exception() for f in futures]
    for e in errors:
        if e is not None:
            raise e
