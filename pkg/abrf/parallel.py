"""
Bounded concurrent execution of blocking work.

gather_threads: one task per item, asyncio.gather over them, each task
pushed to a worker thread and a semaphore capping how many run at once.

gather_processes: the same contract on joblib worker processes, for
CPU-bound numpy work that holds the GIL between array calls.

Both return results in input order.
"""

import asyncio

from joblib import Parallel, delayed

from abrf import console


async def _gather(func, items, limit):
    semaphore = asyncio.Semaphore(max(1, limit))

    async def run_one(item):
        async with semaphore:
            return await asyncio.to_thread(func, item)

    return await asyncio.gather(*[run_one(item) for item in items])


def gather_threads(func, items, limit=1):
    """Apply func to every item, at most `limit` at a time; returns a list."""
    items = list(items)
    if limit <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    return asyncio.run(_gather(func, items, limit))


def _call_quietly(func, item, verbose):
    # worker processes start with the environment's verbosity, not the parent's
    console.set_verbose(verbose)
    return func(item)


def gather_processes(func, items, limit=1):
    """Apply func to every item in up to `limit` worker processes; returns a list."""
    items = list(items)
    if limit <= 1 or len(items) <= 1:
        return [func(item) for item in items]
    verbose = console.is_verbose()
    workers = Parallel(n_jobs=min(limit, len(items)), backend="loky")
    return workers(delayed(_call_quietly)(func, item, verbose) for item in items)
