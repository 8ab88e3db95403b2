import os
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional

from collapse_errors import DomainError, UsageError
from logging_setup import get_logger

logger = get_logger("TrialRunner")

THREADS_ENV_VAR = "COLLAPSE_LAB_THREADS"

# Fixed shard size keeps float reductions identical for any worker count.
SHARD_SIZE = 1024


@dataclass
class ShardResult:
    start: int
    stop: int
    counts: Dict[str, float] = field(default_factory=dict)
    records: List[object] = field(default_factory=list)


def merge_counts(target: Dict[str, float], source: Dict[str, float]):
    for key, value in source.items():
        target[key] = target.get(key, 0) + value


def resolve_worker_count(explicit: Optional[int] = None) -> int:
    if explicit is not None:
        if explicit < 1:
            raise DomainError(f"Worker count must be >= 1, got {explicit}")
        return explicit
    env_value = os.environ.get(THREADS_ENV_VAR)
    if env_value:
        try:
            workers = int(env_value)
        except ValueError:
            raise UsageError(f"{THREADS_ENV_VAR} must be an integer, got {env_value!r}")
        if workers < 1:
            raise DomainError(f"{THREADS_ENV_VAR} must be >= 1, got {workers}")
        return workers
    return os.cpu_count() or 1


class TrialRunner:
    """Shards trial indices over a thread pool and merges shards in index order."""

    def __init__(self, workers: Optional[int] = None, shard_size: int = SHARD_SIZE):
        self.workers = resolve_worker_count(workers)
        self.shard_size = shard_size
        self._shutdown_event = threading.Event()
        logger.info(f"Trial runner initialized with {self.workers} worker(s)")

    def stop(self):
        self._shutdown_event.set()
        logger.info("Trial runner stop requested")

    def is_stopped(self) -> bool:
        return self._shutdown_event.is_set()

    def _run_shard(
        self, shard_fn: Callable[[int, int], ShardResult], start: int, stop: int
    ) -> Optional[ShardResult]:
        if self._shutdown_event.is_set():
            return None
        return shard_fn(start, stop)

    def run(self, shard_fn: Callable[[int, int], ShardResult], trials: int) -> ShardResult:
        if trials < 1:
            raise DomainError(f"trials must be >= 1, got {trials}")

        bounds = [
            (start, min(start + self.shard_size, trials))
            for start in range(0, trials, self.shard_size)
        ]
        logger.debug(f"Running {trials} trials in {len(bounds)} shard(s)")

        if self.workers == 1 or len(bounds) == 1:
            shards = [self._run_shard(shard_fn, start, stop) for start, stop in bounds]
        else:
            with ThreadPoolExecutor(max_workers=self.workers) as executor:
                futures = [
                    executor.submit(self._run_shard, shard_fn, start, stop)
                    for start, stop in bounds
                ]
                shards = [future.result() for future in futures]

        if any(shard is None for shard in shards):
            raise KeyboardInterrupt("Trial run interrupted before completion")

        merged = ShardResult(0, trials)
        for shard in shards:
            merge_counts(merged.counts, shard.counts)
            merged.records.extend(shard.records)
        return merged
