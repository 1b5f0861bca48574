"""
NocPerf - 实验点调度器
负责把互相独立的实验点 (扫描点/种子) 分发到进程池, 并按提交顺序返回结果
"""
from concurrent.futures import ProcessPoolExecutor, as_completed
from typing import Any, Callable, Sequence
import logging
import time

import psutil

from .errors import ConfigError

logger = logging.getLogger(__name__)


def default_jobs() -> int:
    """默认并行度: 物理核数"""
    return psutil.cpu_count(logical=False) or psutil.cpu_count(logical=True) or 1


class Scheduler:
    """实验点调度器"""

    def __init__(self, jobs: int | None = None):
        if jobs is not None and jobs < 1:
            raise ConfigError(f"--jobs must be >= 1, got {jobs}")
        self.jobs = jobs or default_jobs()

    def run(
        self,
        func: Callable[[Any], Any],
        points: Sequence[Any],
        on_done: Callable[[int, Any], None] | None = None,
    ) -> list[Any]:
        """
        对每个点调用 func, 结果顺序与 points 一致 (与完成顺序无关)

        func 与 points 必须可 pickle; jobs == 1 或只有一个点时在当前进程串行执行.
        on_done(index, result) 在每个点完成时回调 (用于进度条).
        """
        points = list(points)
        if not points:
            return []
        started = time.perf_counter()

        results: list[Any] = [None] * len(points)
        workers = min(self.jobs, len(points))
        if workers == 1:
            for index, point in enumerate(points):
                results[index] = func(point)
                if on_done:
                    on_done(index, results[index])
        else:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = {pool.submit(func, point): index for index, point in enumerate(points)}
                for future in as_completed(futures):
                    index = futures[future]
                    results[index] = future.result()
                    if on_done:
                        on_done(index, results[index])

        elapsed = time.perf_counter() - started
        logger.info(f"Ran {len(points)} points on {workers} workers in {elapsed:.2f}s")
        return results
