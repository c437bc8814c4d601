"""Functions to execute replications serially or in a worker pool"""

from __future__ import annotations

import enum
import time
from concurrent.futures import ProcessPoolExecutor
from typing import Callable, Sequence, TypeVar

R = TypeVar("R")


class RunMode(enum.Enum):
    """Choose the run mode"""

    serial = 0
    pool = 1


def handle_replications(
    run_mode: RunMode,
    task: Callable[[int], R],
    reps: Sequence[int],
    num_workers: int = 0,
    label: str = "replications",
) -> list[R]:
    """Run ``task`` on every replication index in the mode requested

    Parameters
    ----------
    run_mode: RunMode
        How to run the replications, serial or pool

    task: Callable[[int], R]
        Function of the replication index, must be picklable in pool mode

    reps: Sequence[int]
        Replication indices

    num_workers: int
        Size of the worker pool, 0 for one worker per cpu

    label: str
        Used in the progress messages

    Returns
    -------
    list[R]
        Results, in the order of ``reps`` whatever the order of completion
    """
    print(f"{label}: {len(reps)} in {run_mode.name} mode")
    _start_time = time.time()
    print(">>>>>>>>")
    if run_mode == RunMode.serial:
        results = [task(rep_) for rep_ in reps]
    elif run_mode == RunMode.pool:
        with ProcessPoolExecutor(max_workers=num_workers or None) as executor:
            results = list(executor.map(task, reps))
    else:  # pragma: no cover
        raise AssertionError(f"Unknown run mode {run_mode}")
    _end_time = time.time()
    _elapsed_time = _end_time - _start_time
    print("<<<<<<<<")
    print(f"{label} completed in {_elapsed_time} seconds\n")
    return results
