# v1.0.0 - Work Package 1: Background Workers
import os
import traceback
from concurrent.futures import ThreadPoolExecutor
from typing import List, Optional, Sequence, Tuple

import numpy as np

from console import log


class WorkerResult:
    """
    Outcome of one worker: either a value or the formatted traceback of its failure.
    """
    def __init__(self, key, value=None, error: Optional[BaseException] = None, trace: str = ""):
        self.key = key
        self.value = value
        self.error = error
        self.trace = trace

    @property
    def ok(self) -> bool:
        return self.error is None


class TripleHistogramWorker:
    """
    Counts one triple's jointly observed records into an I x I x I tensor.
    Reads the shared bin-index matrix, never writes to it.
    """
    def __init__(self, triple: Tuple[int, int, int], bins: np.ndarray, I: int):
        self.triple = triple
        self.bins = bins
        self.I = I

    def run(self) -> WorkerResult:
        try:
            j, k, l = self.triple
            cols = self.bins[:, [j, k, l]]
            observed = np.all(cols >= 0, axis=1)
            count = int(observed.sum())
            if count == 0:
                return WorkerResult(self.triple, (None, 0))
            c = cols[observed]
            I = self.I
            flat = (c[:, 0] * I + c[:, 1]) * I + c[:, 2]
            tensor = np.bincount(flat, minlength=I ** 3).reshape(I, I, I) / count
            return WorkerResult(self.triple, (tensor, count))
        except Exception as e:
            trace = "".join(traceback.format_exception(None, e, e.__traceback__))
            return WorkerResult(self.triple, error=e, trace=trace)


def pool_size() -> int:
    """Thread count from MIXSINC_WORKERS, default 1 (run inline)."""
    raw = os.getenv("MIXSINC_WORKERS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def run_workers(workers: Sequence, max_workers: Optional[int] = None) -> List[WorkerResult]:
    """
    Runs every worker and returns results in submission order, so callers merge
    deterministically whatever the scheduling was.
    """
    size = pool_size() if max_workers is None else max(1, max_workers)
    if size == 1 or len(workers) <= 1:
        return [w.run() for w in workers]

    log("WorkerPool", f"Running {len(workers)} jobs on {size} threads.")
    with ThreadPoolExecutor(max_workers=size) as pool:
        return list(pool.map(lambda w: w.run(), workers))
