from __future__ import annotations

import asyncio
from collections.abc import Awaitable, Callable
from concurrent.futures import Executor, ProcessPoolExecutor
from functools import partial
from typing import TypeVar

T = TypeVar("T")
U = TypeVar("U")


async def run_blocking(fn: Callable[..., T], *args, executor: Executor | None = None) -> T:
    """Run a CPU-bound callable off the event loop (default thread pool when no executor)."""
    loop = asyncio.get_running_loop()
    return await loop.run_in_executor(executor, partial(fn, *args))


async def map_with_limit(
    items: list[U],
    worker: Callable[[U], Awaitable[T]],
    concurrency: int,
) -> list[T]:
    """Run worker(item) across items with at most ``concurrency`` in flight.

    Results come back in input order whatever the completion order.
    """
    if concurrency < 1:
        raise ValueError("concurrency must be >= 1")

    semaphore = asyncio.Semaphore(concurrency)

    async def _run_one(item: U) -> T:
        async with semaphore:
            return await worker(item)

    return list(await asyncio.gather(*[_run_one(item) for item in items]))


async def map_blocking(items: list[U], fn: Callable[[U], T], workers: int) -> list[T]:
    """Fan a blocking ``fn`` out over a process pool of ``workers``; one worker runs in a thread."""
    if workers < 1:
        raise ValueError("workers must be >= 1")
    if workers == 1:
        return await map_with_limit(items, lambda item: run_blocking(fn, item), 1)
    with ProcessPoolExecutor(max_workers=workers) as pool:
        return await map_with_limit(items, lambda item: run_blocking(fn, item, executor=pool), workers)
