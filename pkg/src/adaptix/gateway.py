"""Application-server core: admission, tier-priority scheduling, dispatch.

The gateway is clock-agnostic. Callers pass the current time in integer
microseconds; the simulator drives it from a virtual clock and the HTTP
server from the wall clock.
"""

from __future__ import annotations

import heapq
import itertools
import threading
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .catalog import ServiceCatalog, service
from .metrics import MetricsRecorder, MetricsWindow
from .modlib import (
    LoadOutcome,
    ModuleRegistry,
    ModuleState,
    ReconfigReport,
    apply_plan,
)
from .profiles import Segment, UserProfile, classify
from .tiering import (
    PRIMARY_FRACTION,
    Tier,
    TierAssignment,
    assign_tiers,
    merge_assignments,
)

DEFAULT_CAPACITY = {Tier.PRIMARY: 64, Tier.SECONDARY: 32, Tier.TERTIARY: 16}
DEFAULT_AGING_LIMIT_MS = 500.0


@dataclass
class QueueConfig:
    capacity_per_tier: dict[Tier, int | None] = field(default_factory=lambda: dict(DEFAULT_CAPACITY))
    aging_limit_ms: float = DEFAULT_AGING_LIMIT_MS
    workers: int = 4

    def __post_init__(self):
        caps = {Tier(k) if not isinstance(k, Tier) else k: v for k, v in self.capacity_per_tier.items()}
        for tier in Tier:
            caps.setdefault(tier, DEFAULT_CAPACITY[tier])
        for tier, cap in caps.items():
            if cap is not None and cap < 1:
                raise ValueError(f"capacity for {tier.name} must be >= 1")
        self.capacity_per_tier = caps
        if not self.aging_limit_ms > 0:
            raise ValueError("aging_limit_ms must be positive")
        if self.workers < 1:
            raise ValueError("workers must be >= 1")

    @property
    def aging_limit_us(self) -> int:
        return max(1, round(self.aging_limit_ms * 1000))

    @property
    def total_capacity(self) -> int | None:
        caps = list(self.capacity_per_tier.values())
        return None if any(c is None for c in caps) else sum(caps)


@dataclass
class Request:
    request_id: int
    user: UserProfile
    service: str
    arrival_us: int
    payload: dict = field(default_factory=dict)
    # pre-drawn processing time; simulation only
    service_us: int | None = None
    tier: Tier | None = None
    segment: Segment | None = None
    requeues: int = 0
    start_us: int | None = None

    @property
    def arrival_ms(self) -> float:
        return self.arrival_us / 1000.0


class Rejection(Enum):
    QUEUE_FULL = "QueueFull"
    UNKNOWN_SERVICE = "UnknownService"


@dataclass(frozen=True)
class Admission:
    admitted: bool
    reason: Rejection | None = None
    tier: Tier | None = None

    def __bool__(self):
        return self.admitted


@dataclass
class Response:
    request_id: int
    outcome: str  # "ok" | "rejected" | "failed"
    latency_ms: float
    result: Any = None
    reason: str | None = None
    error: str | None = None
    tier: Tier | None = None

    def __post_init__(self):
        if self.latency_ms < 0:
            raise ValueError("latency must be non-negative")

    def to_dict(self) -> dict:
        out = {
            "request_id": self.request_id,
            "outcome": self.outcome,
            "latency_ms": round(self.latency_ms, 3),
        }
        if self.tier is not None:
            out["tier"] = self.tier.label
        if self.outcome == "ok":
            out["result"] = self.result
        elif self.outcome == "rejected":
            out["reason"] = self.reason
        else:
            out["error"] = self.error
        return out


class DispatchStep(Enum):
    READY = "ready"
    WAIT_LOAD = "wait_load"
    BLOCKED = "blocked"


def effective_priority(tier: Tier, arrival_us: int, now_us: int, aging_us: int) -> int:
    return int(tier) - max(0, now_us - arrival_us) // aging_us


class Gateway:
    """Admits, orders and dispatches requests against a module registry.

    With ``fifo=True`` the gateway behaves as the static baseline: one
    queue served in arrival order and every module preloaded. Tiers are
    still computed so reports can be broken down the same way.
    """

    def __init__(
        self,
        catalog: ServiceCatalog,
        registry: ModuleRegistry,
        *,
        budget: int = 20,
        queue: QueueConfig | None = None,
        fifo: bool = False,
        primary_fraction: float = PRIMARY_FRACTION,
        now_us: int = 0,
    ):
        self.catalog = catalog
        self.registry = registry
        self.queue = queue or QueueConfig()
        self.fifo = fifo
        self.primary_fraction = primary_fraction
        self.budget = budget
        self.lock = threading.RLock()
        self._queues: dict[int, list] = {0: []} if fifo else {int(t): [] for t in Tier}
        self._seq = itertools.count()
        self.parked: list[Request] = []
        self.awaiting_load: dict[str, list[Request]] = {}
        self.pending: Counter[str] = Counter()
        self.admitted = 0
        self.served = 0
        self.failed = 0
        self.rejected = 0
        self.rejected_by: Counter[str] = Counter()
        self.served_by_tier: Counter[Tier] = Counter()
        # popped by a worker and neither finished nor parked
        self.active = 0
        self.metrics = MetricsRecorder(self.queue.workers, window_start_us=now_us)
        self.plans: dict[Segment, TierAssignment] = {}
        self._replan()
        if fifo:
            # the baseline starts fully resident, so loads complete at once
            hook, registry.on_load_started = registry.on_load_started, None
            try:
                for sid in catalog.ids:
                    if registry.request_load(sid) is LoadOutcome.STARTED:
                        registry.complete_load(sid)
            finally:
                registry.on_load_started = hook
        else:
            apply_plan(registry, self.merged_plan)

    # -- planning ------------------------------------------------------

    def _replan(self) -> None:
        self.plans = {
            seg: assign_tiers(self.catalog, seg, self.budget, self.primary_fraction)
            for seg in self.catalog.segments
        }

    @property
    def merged_plan(self) -> TierAssignment:
        return merge_assignments(self.plans.values())

    def plan_for(self, segment: Segment) -> TierAssignment:
        return self.plans[segment]

    def set_budget(self, budget: int) -> ReconfigReport:
        with self.lock:
            if budget == self.budget:
                return ReconfigReport()
            self.budget = budget
            self._replan()
            if self.fifo:
                return ReconfigReport()
            report = apply_plan(self.registry, self.merged_plan)
            self._unload_idle_on_demand()
            return report

    def _unload_idle_on_demand(self) -> None:
        for sid, mod in self.registry.modules.items():
            if (
                mod.planned_tier is Tier.TERTIARY
                and mod.state is ModuleState.LOADED
                and mod.in_flight == 0
                and self.pending[sid] == 0
            ):
                self.registry.drain_and_unload(sid)

    # -- admission and scheduling -------------------------------------

    def _queue_key(self, tier: Tier) -> int:
        return 0 if self.fifo else int(tier)

    def _capacity(self, key: int) -> int | None:
        if self.fifo:
            return self.queue.total_capacity
        return self.queue.capacity_per_tier[Tier(key)]

    def queue_depth(self) -> dict[Tier, int]:
        with self.lock:
            if self.fifo:
                depth = Counter(item[3].tier for item in self._queues[0])
                return {t: depth.get(t, 0) for t in Tier}
            return {t: len(self._queues[int(t)]) for t in Tier}

    @property
    def in_queue(self) -> int:
        return self.admitted - self.served

    def admit(self, req: Request, now_us: int | None = None) -> Admission:
        with self.lock:
            if req.service not in self.catalog:
                self.rejected += 1
                self.metrics.rejected += 1
                self.rejected_by[Rejection.UNKNOWN_SERVICE.value] += 1
                return Admission(False, Rejection.UNKNOWN_SERVICE)
            seg = classify(req.user)
            req.segment = seg
            req.tier = self.plans[seg].tier_of[req.service]
            key = self._queue_key(req.tier)
            cap = self._capacity(key)
            if cap is not None and len(self._queues[key]) >= cap:
                self.rejected += 1
                self.metrics.rejected += 1
                self.rejected_by[Rejection.QUEUE_FULL.value] += 1
                return Admission(False, Rejection.QUEUE_FULL, req.tier)
            self._push(req)
            self.admitted += 1
            self.metrics.admitted += 1
            self.pending[req.service] += 1
            return Admission(True, None, req.tier)

    def _push(self, req: Request) -> None:
        heapq.heappush(
            self._queues[self._queue_key(req.tier)],
            (req.arrival_us, req.request_id, next(self._seq), req),
        )

    def schedule_next(self, now_us: int) -> Request | None:
        """Pop the request with the lowest aged priority, or None if idle.

        Aged priority is ``tier - floor(wait / aging_limit)``; ties go to
        the earlier arrival, then the lower request id. Heads suffice: in a
        tier the head is the oldest request and so the most promoted.
        """
        with self.lock:
            aging = self.queue.aging_limit_us
            best_key = None
            best = None
            for key, heap in self._queues.items():
                if not heap:
                    continue
                arrival, rid, _, req = heap[0]
                if self.fifo:
                    rank = (0, arrival, rid)
                else:
                    rank = (effective_priority(req.tier, arrival, now_us, aging), arrival, rid)
                if best is None or rank < best:
                    best, best_key = rank, key
            if best_key is None:
                return None
            req = heapq.heappop(self._queues[best_key])[3]
            self.active += 1
            self.metrics.busy_change(now_us, +1)
            return req

    # -- dispatch ------------------------------------------------------

    def begin_dispatch(self, req: Request, now_us: int) -> DispatchStep:
        """Make the target module runnable for ``req``.

        READY means work has begun on the module. Otherwise the worker is
        released: WAIT_LOAD holds the request until :meth:`load_finished`
        for its module, BLOCKED parks it until the next :meth:`unpark`.
        Either way the request later re-enters its queue with its original
        arrival time, so the wait is charged to its latency.
        """
        with self.lock:
            reg = self.registry
            sid = req.service
            mod = reg.modules[sid]
            if mod.state is ModuleState.UNLOADED:
                outcome = reg.request_load(sid)
                if outcome is LoadOutcome.DEFERRED and reg.make_room(mod.load_cost, frozenset({sid})):
                    outcome = reg.request_load(sid)
                if outcome is LoadOutcome.DEFERRED:
                    return self._park(req, now_us)
            if mod.state is ModuleState.LOADING:
                self.awaiting_load.setdefault(sid, []).append(req)
                self._release(now_us)
                return DispatchStep.WAIT_LOAD
            if mod.state is ModuleState.DRAINING:
                req.requeues += 1
                return self._park(req, now_us)
            reg.begin(sid)
            if req.start_us is None:
                req.start_us = now_us
            return DispatchStep.READY

    def _release(self, now_us: int) -> None:
        self.active -= 1
        self.metrics.busy_change(now_us, -1)

    def _park(self, req: Request, now_us: int) -> DispatchStep:
        self.parked.append(req)
        self._release(now_us)
        return DispatchStep.BLOCKED

    def load_finished(self, service_id: str) -> int:
        """Requeue requests that were waiting for ``service_id`` to load."""
        with self.lock:
            waiting = self.awaiting_load.pop(service_id, [])
            for req in waiting:
                self._push(req)
            return len(waiting)

    def unpark(self) -> int:
        """Return parked requests to their queues; they keep their arrival times."""
        with self.lock:
            n = len(self.parked)
            for req in self.parked:
                self._push(req)
            self.parked.clear()
            return n

    def execute(self, req: Request) -> tuple[str, Any]:
        handler = self.registry.modules[req.service].handler
        if handler is None:
            return "ok", None
        try:
            return "ok", handler(req)
        except Exception as exc:  # handler faults become Failed responses
            return "failed", f"{type(exc).__name__}: {exc}"

    def finish(self, req: Request, now_us: int, outcome: str = "ok", value: Any = None) -> Response:
        with self.lock:
            sid = req.service
            self.registry.end(sid)
            self.served += 1
            self.served_by_tier[req.tier] += 1
            self.active -= 1
            if outcome != "ok":
                self.failed += 1
            self.pending[sid] -= 1
            latency_us = now_us - req.arrival_us
            self.metrics.busy_change(now_us, -1)
            self.metrics.record_served(req.tier, latency_us)
            mod = self.registry.modules[sid]
            if (
                not self.fifo
                and mod.planned_tier is Tier.TERTIARY
                and mod.in_flight == 0
                and self.pending[sid] == 0
                and mod.state is ModuleState.LOADED
            ):
                self.registry.drain_and_unload(sid)
            self.unpark()
            return Response(
                request_id=req.request_id,
                outcome=outcome,
                latency_ms=latency_us / 1000.0,
                result=value if outcome == "ok" else None,
                error=value if outcome != "ok" else None,
                tier=req.tier,
            )

    # -- observation ---------------------------------------------------

    def observe(self, now_us: int) -> MetricsWindow:
        with self.lock:
            return self.metrics.snapshot(now_us, self.queue_depth())

    def roll_window(self, now_us: int) -> MetricsWindow:
        with self.lock:
            return self.metrics.roll(now_us, self.queue_depth())

    def totals(self) -> dict:
        with self.lock:
            return {
                "admitted": self.admitted,
                "served": self.served,
                "failed": self.failed,
                "rejected": self.rejected,
                "in_queue": self.in_queue,
                "served_by_tier": {t.label: self.served_by_tier.get(t, 0) for t in Tier},
                "rejected_by_reason": dict(self.rejected_by),
                "budget": self.budget,
                "loaded_cost": self.registry.loaded_cost,
            }

    def queued_count(self) -> int:
        with self.lock:
            return (
                sum(len(q) for q in self._queues.values())
                + len(self.parked)
                + sum(len(w) for w in self.awaiting_load.values())
            )

    def accounting_ok(self) -> bool:
        """admitted = served + queued (incl. parked) + taken by a worker."""
        with self.lock:
            return self.admitted == self.served + self.queued_count() + self.active

    def describe(self, service_id: str) -> dict:
        svc = service(self.catalog, service_id)
        return {"id": svc.id, "display_name": svc.display_name}
