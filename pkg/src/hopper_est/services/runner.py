"""Parallel execution of independent work items.

A batch is bounded in wall time by ``HOPPER_EST_TIMEOUT``: on expiry the
worker processes are terminated and inline work is abandoned on its daemon
thread.
"""

import asyncio
import logging
import os
import threading
import time
from collections.abc import Callable, Mapping
from concurrent.futures import ProcessPoolExecutor
from concurrent.futures.process import BrokenProcessPool
from typing import Any

from ..utils.results import GLOBAL_ERROR_KEY, error_response, format_results

logger = logging.getLogger(__name__)
TIMEOUT = int(os.environ.get("HOPPER_EST_TIMEOUT", "3600"))

# read-only data shipped once to each worker process
_SHARED: Any = None

WorkFunc = Callable[[Any, Any], Any]


class RunnerError(ValueError):
    """Raised when a batch fails as a whole."""

    def __init__(self, message: str, code: str = "execution_error") -> None:
        super().__init__(message)
        self.code = code


def _init_worker(shared: Any) -> None:
    global _SHARED
    _SHARED = shared


def _call(func: WorkFunc, item: Any) -> Any:
    return func(_SHARED, item)


def _global_error(message: str, code: str) -> dict[str, dict[str, Any]]:
    """Return a key-indexed error payload for global failures."""
    return {GLOBAL_ERROR_KEY: error_response(message, code=code)}


def _run_inline(func: WorkFunc, items: Mapping[str, Any], shared: Any) -> dict[str, Any]:
    outcomes: dict[str, Any] = {}
    for key, item in items.items():
        try:
            outcomes[key] = func(shared, item)
        except Exception as exc:
            logger.exception("Work item %s failed", key)
            outcomes[key] = exc
    return outcomes


def _settle(future: asyncio.Future, result: Any, exc: BaseException | None) -> None:
    if future.done():
        return
    if exc is None:
        future.set_result(result)
    else:
        future.set_exception(exc)


def _start_inline(func: WorkFunc, items: Mapping[str, Any], shared: Any) -> asyncio.Future:
    """Run the batch on a daemon thread; the returned future carries its outcomes."""
    loop = asyncio.get_running_loop()
    future = loop.create_future()

    def work() -> None:
        result, error = None, None
        try:
            result = _run_inline(func, items, shared)
        except BaseException as exc:
            error = exc
        try:
            loop.call_soon_threadsafe(_settle, future, result, error)
        except RuntimeError:
            # the loop closed after a timeout
            logger.debug("Inline batch finished after its event loop closed")

    threading.Thread(target=work, name="hopper-est-inline", daemon=True).start()
    return future


def _terminate(pool: ProcessPoolExecutor) -> None:
    # ProcessPoolExecutor.terminate_workers() needs Python 3.14
    processes = list((getattr(pool, "_processes", None) or {}).values())
    for process in processes:
        process.terminate()
    pool.shutdown(wait=False, cancel_futures=True)


async def _run_pool(
    func: WorkFunc, items: Mapping[str, Any], shared: Any, workers: int, timeout: float
) -> dict[str, Any]:
    pool = ProcessPoolExecutor(max_workers=workers, initializer=_init_worker, initargs=(shared,))
    try:
        futures = {
            key: asyncio.wrap_future(pool.submit(_call, func, item)) for key, item in items.items()
        }
        _, pending = await asyncio.wait(futures.values(), timeout=timeout)
    except BaseException:
        _terminate(pool)
        raise
    if pending:
        _terminate(pool)
        raise TimeoutError
    pool.shutdown(wait=True)

    outcomes: dict[str, Any] = {}
    for key, future in futures.items():
        exc = future.exception()
        if isinstance(exc, BrokenProcessPool):
            raise exc
        if exc is not None:
            logger.error("Work item %s failed: %s", key, exc)
            outcomes[key] = exc
        else:
            outcomes[key] = future.result()
    return outcomes


async def execute(
    func: WorkFunc,
    items: Mapping[str, Any],
    *,
    shared: Any = None,
    workers: int = 1,
    label: str | None = None,
) -> dict[str, dict[str, Any]]:
    """Run ``func(shared, item)`` for every item and return formatted results.

    Args:
        func: Module-level work function (must be picklable when workers > 1)
        items: Work items keyed by a stable name
        shared: Read-only data handed to every call
        workers: Process count; 1 or less runs inline on a daemon thread
        label: Name used in log messages

    Returns:
        Dictionary mapping item key to an ItemResult dump, or a single
        GLOBAL_ERROR_KEY entry when the batch failed as a whole or ran past
        ``TIMEOUT`` seconds
    """
    name = label or getattr(func, "__name__", "work")
    if not items:
        return {}
    logger.info("Executing %s on %d items with %d workers", name, len(items), max(workers, 1))

    start_time = time.perf_counter()
    try:
        if workers <= 1:
            outcomes = await asyncio.wait_for(_start_inline(func, items, shared), timeout=TIMEOUT)
        else:
            outcomes = await _run_pool(func, items, shared, workers, TIMEOUT)
    except (TimeoutError, asyncio.TimeoutError):
        logger.error("Batch %s timed out after %ds", name, TIMEOUT)
        return _global_error(f"Execution timed out after {TIMEOUT}s", code="timeout")
    except (BrokenProcessPool, OSError) as e:
        logger.exception("Batch %s failed: %s", name, e)
        return _global_error(f"Execution failed: {e}", code="execution_error")

    duration = time.perf_counter() - start_time
    failed = sum(1 for outcome in outcomes.values() if isinstance(outcome, BaseException))
    logger.info("Batch %s completed in %.2fs. Failed: %d", name, duration, failed)
    return format_results(outcomes)


def run_batch(
    func: WorkFunc,
    items: Mapping[str, Any],
    *,
    shared: Any = None,
    workers: int = 1,
    label: str | None = None,
) -> dict[str, dict[str, Any]]:
    """Synchronous wrapper around ``execute``."""
    return asyncio.run(execute(func, items, shared=shared, workers=workers, label=label))


__all__: list[str] = ["GLOBAL_ERROR_KEY", "RunnerError", "execute", "run_batch"]
