"""
evalManager.py -- Async per-point evaluation pool for HypoKernel

Features:
- asyncio.Queue of (index, point) items
- async worker pool, each worker hands the pure evaluation to a ThreadPoolExecutor
- results stored by index and returned in input order
- the lowest failing index is raised after the queue drains
- status callbacks
"""

from __future__ import annotations

import asyncio
from concurrent.futures import ThreadPoolExecutor
from typing import Any, Callable, Dict, Optional, Sequence

from .errors import PointEvaluationError
from .utils import LogManager, thread_cap


class EvalManager:
    """Evaluates one function over many points with a bounded worker pool."""

    def __init__(self, evaluate: Callable[[Any], Any], threads: Optional[int] = None):
        self.logger = LogManager.get("EvalManager")

        self.evaluate = evaluate
        self.threads = max(1, threads or thread_cap())

        # Queue + workers
        self.queue: asyncio.Queue = asyncio.Queue()
        self.workers: list[asyncio.Task] = []
        self.executor: Optional[ThreadPoolExecutor] = None
        self.running = False

        # Tracking info
        self.results: Dict[int, Any] = {}
        self.failure: Optional[tuple[int, BaseException]] = None

        # Callbacks
        self.status_callbacks: list[Callable[[str, Any], None]] = []

    # -------------------------------------------------------------------------
    # LIFECYCLE METHODS
    # -------------------------------------------------------------------------

    async def start(self):
        if self.running:
            return

        self.running = True
        self.queue = asyncio.Queue()
        self.executor = ThreadPoolExecutor(max_workers=self.threads, thread_name_prefix="eval")

        for i in range(self.threads):
            worker = asyncio.create_task(self._worker(), name=f"worker-{i}")
            self.workers.append(worker)

        self.logger.debug(f"Spawned {len(self.workers)} async workers")

    async def stop(self):
        if not self.running:
            return

        self.running = False

        for w in self.workers:
            w.cancel()

        await asyncio.gather(*self.workers, return_exceptions=True)
        self.workers.clear()

        if self.executor is not None:
            self.executor.shutdown(wait=True)
            self.executor = None
        self.logger.debug("EvalManager stopped")

    # -------------------------------------------------------------------------
    # PUBLIC API
    # -------------------------------------------------------------------------

    async def submit(self, index: int, point: Any):
        await self.queue.put((index, point))
        self._notify("point_added", index)

    async def run_async(self, points: Sequence[Any]) -> list[Any]:
        self.results.clear()
        self.failure = None
        await self.start()
        try:
            for i, p in enumerate(points):
                await self.submit(i, p)
            await self.queue.join()
        finally:
            await self.stop()

        if self.failure is not None:
            index, exc = self.failure
            raise PointEvaluationError(index, exc) from exc
        return [self.results[i] for i in range(len(points))]

    def run(self, points: Sequence[Any]) -> list[Any]:
        """Evaluate every point; results in input order."""
        return asyncio.run(self.run_async(points))

    # -------------------------------------------------------------------------
    # WORKER LOOP
    # -------------------------------------------------------------------------

    async def _worker(self):
        loop = asyncio.get_running_loop()
        while self.running:
            index, point = await self.queue.get()
            try:
                self.results[index] = await loop.run_in_executor(
                    self.executor, self.evaluate, point
                )
                self._notify("point_done", index)
            except Exception as exc:
                self.logger.error(f"Point {index} failed: {exc}")
                if self.failure is None or index < self.failure[0]:
                    self.failure = (index, exc)
                self._notify("point_failed", index)
            finally:
                self.queue.task_done()

    # -------------------------------------------------------------------------
    # UTILS
    # -------------------------------------------------------------------------

    def _notify(self, event, item):
        for cb in self.status_callbacks:
            try:
                cb(event, item)
            except Exception:
                pass
