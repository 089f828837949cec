"""Queue kernel selection.

The compiled extension is used when it was built; set ``ADAPTIX_PURE=1`` to
force the pure-Python engine. Both return ``(start_us, finish_us,
rejected, events)`` arrays for the same inputs, bit for bit.
"""

from __future__ import annotations

import os
from dataclasses import dataclass

import numpy as np

from . import _qcore_py

try:
    if os.environ.get("ADAPTIX_PURE") == "1":
        raise ImportError("pure engine forced")
    from . import _qcore as _compiled
except ImportError:
    _compiled = None

BACKEND = "cython" if _compiled is not None else "python"


def backends() -> dict:
    out = {"python": _qcore_py.simulate_queue}
    if _compiled is not None:
        out["cython"] = _compiled.simulate_queue
    return out


@dataclass
class QueueRun:
    start_us: np.ndarray
    finish_us: np.ndarray
    rejected: np.ndarray
    events: int

    @property
    def served(self) -> np.ndarray:
        return self.finish_us >= 0


def simulate_queue(
    arrival_us,
    service_us,
    rank,
    queue_of,
    capacity,
    workers: int,
    aging_us: int,
    horizon_us: int = -1,
    backend: str | None = None,
) -> QueueRun:
    """Run the kernel. ``capacity[q] < 0`` means queue ``q`` is unbounded."""
    fn = backends()[backend or BACKEND]
    if workers < 1 or aging_us < 1:
        raise ValueError("workers and aging_us must be >= 1")
    arrival = np.asarray(arrival_us, dtype=np.int64)
    if len(arrival) > 1 and np.any(np.diff(arrival) < 0):
        raise ValueError("arrivals must be sorted")
    start, finish, rejected, events = fn(
        arrival,
        np.asarray(service_us, dtype=np.int64),
        np.asarray(rank, dtype=np.int64),
        np.asarray(queue_of, dtype=np.int64),
        np.asarray(capacity, dtype=np.int64),
        int(workers),
        int(aging_us),
        int(horizon_us),
    )
    return QueueRun(start, finish, rejected.astype(bool), events)


def mean_in_system(arrival_us, run: QueueRun, horizon_us: int) -> float:
    """Time-average number of admitted requests in the system over [0, horizon]."""
    arrival = np.asarray(arrival_us, dtype=np.int64)
    admitted = ~run.rejected & (arrival < horizon_us)
    end = np.where(run.finish_us >= 0, np.minimum(run.finish_us, horizon_us), horizon_us)
    return float(np.sum(end[admitted] - arrival[admitted])) / horizon_us
