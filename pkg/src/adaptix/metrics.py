"""Windowed load metrics recorded by the gateway."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .tiering import Tier


def percentile(values, q: float) -> float:
    """Nearest-rank percentile; 0.0 for an empty sample."""
    if not values:
        return 0.0
    ordered = sorted(values)
    rank = max(1, math.ceil(q / 100.0 * len(ordered)))
    return float(ordered[rank - 1])


@dataclass
class MetricsWindow:
    window_ms: float
    utilization: float
    queue_depth: dict[Tier, int]
    p95_latency_ms: dict[Tier, float]
    rejected: int
    served: int = 0
    admitted: int = 0
    start_ms: float = 0.0

    def __post_init__(self):
        if not 0.0 <= self.utilization <= 1.0:
            raise ValueError(f"utilization {self.utilization} outside [0, 1]")
        if any(d < 0 for d in self.queue_depth.values()):
            raise ValueError("negative queue depth")

    def to_dict(self) -> dict:
        return {
            "start_ms": self.start_ms,
            "window_ms": self.window_ms,
            "utilization": round(self.utilization, 6),
            "served": self.served,
            "admitted": self.admitted,
            "rejected": self.rejected,
            "queue_depth": {t.label: self.queue_depth.get(t, 0) for t in Tier},
            "p95_latency_ms": {t.label: round(self.p95_latency_ms.get(t, 0.0), 3) for t in Tier},
        }


@dataclass
class MetricsRecorder:
    """Accumulates busy-worker time and request outcomes for the open window.

    Times are integer microseconds on whatever clock drives the gateway.
    """

    workers: int
    window_start_us: int = 0
    busy: int = 0
    _last_us: int = 0
    _busy_us: int = 0
    served: int = 0
    admitted: int = 0
    rejected: int = 0
    latencies_us: dict[Tier, list[int]] = field(default_factory=lambda: {t: [] for t in Tier})

    def __post_init__(self):
        self._last_us = self.window_start_us

    def _advance(self, now_us: int) -> None:
        if now_us > self._last_us:
            self._busy_us += self.busy * (now_us - self._last_us)
            self._last_us = now_us

    def busy_change(self, now_us: int, delta: int) -> None:
        self._advance(now_us)
        self.busy += delta
        if self.busy < 0 or self.busy > self.workers:
            raise RuntimeError(f"busy worker count {self.busy} out of range")

    def record_served(self, tier: Tier, latency_us: int) -> None:
        self.served += 1
        self.latencies_us[tier].append(latency_us)

    def snapshot(self, now_us: int, queue_depth: dict[Tier, int]) -> MetricsWindow:
        span = now_us - self.window_start_us
        pending = self.busy * max(0, now_us - self._last_us)
        busy_us = self._busy_us + pending
        util = 0.0 if span <= 0 else min(1.0, busy_us / (self.workers * span))
        return MetricsWindow(
            window_ms=span / 1000.0,
            utilization=util,
            queue_depth=dict(queue_depth),
            p95_latency_ms={t: percentile(v, 95) / 1000.0 for t, v in self.latencies_us.items()},
            rejected=self.rejected,
            served=self.served,
            admitted=self.admitted,
            start_ms=self.window_start_us / 1000.0,
        )

    def roll(self, now_us: int, queue_depth: dict[Tier, int]) -> MetricsWindow:
        window = self.snapshot(now_us, queue_depth)
        self._advance(now_us)
        self.window_start_us = now_us
        self._busy_us = 0
        self.served = self.admitted = self.rejected = 0
        self.latencies_us = {t: [] for t in Tier}
        return window
