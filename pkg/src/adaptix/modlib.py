"""Module library: loadable service handlers and their lifecycle.

Every module moves along one cycle only::

    UNLOADED -> LOADING -> LOADED -> DRAINING -> UNLOADED

A draining module refuses new work and unloads once its in-flight count
reaches zero, so demoting a busy service never drops a request.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass, field
from enum import Enum
from typing import Any, Callable

from .catalog import ServiceCatalog, UnknownService
from .tiering import Tier, TierAssignment

DEFAULT_LOAD_LATENCY_MS = 50.0


class ModuleState(Enum):
    UNLOADED = "UNLOADED"
    LOADING = "LOADING"
    LOADED = "LOADED"
    DRAINING = "DRAINING"


LEGAL_TRANSITIONS = frozenset(
    {
        (ModuleState.UNLOADED, ModuleState.LOADING),
        (ModuleState.LOADING, ModuleState.LOADED),
        (ModuleState.LOADED, ModuleState.DRAINING),
        (ModuleState.DRAINING, ModuleState.UNLOADED),
    }
)


class LoadOutcome(Enum):
    ALREADY_LOADED = "AlreadyLoaded"
    STARTED = "Started"
    IN_PROGRESS = "InProgress"
    # the registry's resident-cost limit would be exceeded
    DEFERRED = "Deferred"


class AlreadyRegistered(ValueError):
    pass


class IllegalTransition(RuntimeError):
    pass


class ModuleBusy(RuntimeError):
    """Raised when work is offered to a module that is not LOADED."""


@dataclass
class ServiceModule:
    id: str
    handler: Callable[[dict], Any] | None = None
    load_latency_ms: float = DEFAULT_LOAD_LATENCY_MS
    load_cost: int = 1
    state: ModuleState = ModuleState.UNLOADED
    in_flight: int = 0
    dispatched: int = 0
    completed: int = 0
    planned_tier: Tier = Tier.TERTIARY
    unload_requested: bool = False
    reload_requested: bool = False

    def snapshot(self) -> dict:
        return {
            "id": self.id,
            "state": self.state.value,
            "in_flight": self.in_flight,
            "tier": self.planned_tier.label,
        }


@dataclass
class Transition:
    module: str
    source: ModuleState
    target: ModuleState

    def to_dict(self) -> dict:
        return {"module": self.module, "from": self.source.value, "to": self.target.value}


@dataclass
class ReconfigReport:
    transitions: list[Transition] = field(default_factory=list)
    retiered: dict[str, tuple[Tier, Tier]] = field(default_factory=dict)
    deferred: list[str] = field(default_factory=list)

    def __bool__(self):
        return bool(self.transitions or self.retiered or self.deferred)

    def extend(self, other: ReconfigReport) -> None:
        self.transitions.extend(other.transitions)
        self.retiered.update(other.retiered)
        self.deferred.extend(other.deferred)

    def to_dict(self) -> dict:
        return {
            "transitions": [t.to_dict() for t in self.transitions],
            "retiered": {k: [a.label, b.label] for k, (a, b) in sorted(self.retiered.items())},
            "deferred": list(self.deferred),
        }


class ModuleRegistry:
    """Registry of service modules with a shared resident-cost ledger.

    ``on_load_started(module)`` is invoked whenever a load begins; the
    driver decides when the load finishes by calling :meth:`complete_load`
    (after a virtual delay in simulation, on a timer in serve mode).
    """

    def __init__(
        self,
        cost_limit: int | None = None,
        on_load_started: Callable[[ServiceModule], None] | None = None,
    ):
        self.modules: dict[str, ServiceModule] = {}
        self.cost_limit = cost_limit
        self.on_load_started = on_load_started
        self.loaded_cost = 0
        self.peak_cost = 0
        self.history: list[Transition] = []
        self._lock = threading.RLock()
        self._changed = threading.Condition(self._lock)
        self._journal: list[Transition] | None = None

    # -- bookkeeping ---------------------------------------------------

    def _get(self, module_id: str) -> ServiceModule:
        try:
            return self.modules[module_id]
        except KeyError:
            raise UnknownService(module_id) from None

    def _move(self, mod: ServiceModule, target: ModuleState) -> None:
        if (mod.state, target) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"{mod.id}: {mod.state.value} -> {target.value}")
        counted = (ModuleState.LOADING, ModuleState.LOADED)
        if target is ModuleState.LOADING:
            self.loaded_cost += mod.load_cost
            self.peak_cost = max(self.peak_cost, self.loaded_cost)
        elif mod.state in counted and target not in counted:
            self.loaded_cost -= mod.load_cost
        t = Transition(mod.id, mod.state, target)
        mod.state = target
        self.history.append(t)
        if self._journal is not None:
            self._journal.append(t)
        self._changed.notify_all()

    def recomputed_cost(self) -> int:
        return sum(
            m.load_cost
            for m in self.modules.values()
            if m.state in (ModuleState.LOADING, ModuleState.LOADED)
        )

    def state(self, module_id: str) -> ModuleState:
        return self._get(module_id).state

    def snapshot(self) -> list[dict]:
        with self._lock:
            return [m.snapshot() for m in self.modules.values()]

    def states(self) -> dict[str, ModuleState]:
        with self._lock:
            return {mid: m.state for mid, m in self.modules.items()}

    # -- lifecycle -----------------------------------------------------

    def register(self, module: ServiceModule) -> None:
        with self._lock:
            if module.id in self.modules:
                raise AlreadyRegistered(module.id)
            module.state = ModuleState.UNLOADED
            module.in_flight = 0
            self.modules[module.id] = module

    def request_load(self, module_id: str) -> LoadOutcome:
        with self._lock:
            mod = self._get(module_id)
            if mod.state is ModuleState.LOADED:
                return LoadOutcome.ALREADY_LOADED
            if mod.state is ModuleState.LOADING:
                return LoadOutcome.IN_PROGRESS
            if mod.state is ModuleState.DRAINING:
                raise IllegalTransition(f"{module_id}: cannot load while draining")
            if self.cost_limit is not None and self.loaded_cost + mod.load_cost > self.cost_limit:
                return LoadOutcome.DEFERRED
            mod.unload_requested = False
            self._move(mod, ModuleState.LOADING)
            hook = self.on_load_started
        if hook is not None:
            hook(mod)
        return LoadOutcome.STARTED

    def complete_load(self, module_id: str) -> None:
        with self._lock:
            mod = self._get(module_id)
            if mod.state is not ModuleState.LOADING:
                raise IllegalTransition(f"{module_id}: no load in progress")
            self._move(mod, ModuleState.LOADED)
            if mod.unload_requested:
                mod.unload_requested = False
                self._drain(mod)

    def wait_loaded(self, module_id: str, timeout: float | None = None) -> bool:
        """Block until the module leaves LOADING (serve mode only)."""
        with self._changed:
            mod = self._get(module_id)
            self._changed.wait_for(lambda: mod.state is not ModuleState.LOADING, timeout)
            return mod.state is ModuleState.LOADED

    def _drain(self, mod: ServiceModule) -> None:
        self._move(mod, ModuleState.DRAINING)
        if mod.in_flight == 0:
            self._finish_drain(mod)

    def _finish_drain(self, mod: ServiceModule) -> None:
        self._move(mod, ModuleState.UNLOADED)
        if mod.reload_requested:
            mod.reload_requested = False
            self.request_load(mod.id)

    def drain_and_unload(self, module_id: str) -> None:
        with self._lock:
            mod = self._get(module_id)
            mod.reload_requested = False
            if mod.state is ModuleState.LOADED:
                self._drain(mod)
            elif mod.state is ModuleState.LOADING:
                mod.unload_requested = True

    def begin(self, module_id: str) -> None:
        """Start one unit of work; the module must be LOADED."""
        with self._lock:
            mod = self._get(module_id)
            if mod.state is not ModuleState.LOADED:
                raise ModuleBusy(f"{module_id} is {mod.state.value}")
            mod.in_flight += 1
            mod.dispatched += 1

    def end(self, module_id: str) -> None:
        with self._lock:
            mod = self._get(module_id)
            if mod.in_flight <= 0:
                raise IllegalTransition(f"{module_id}: no work in flight")
            mod.in_flight -= 1
            mod.completed += 1
            if mod.state is ModuleState.DRAINING and mod.in_flight == 0:
                self._finish_drain(mod)

    def make_room(self, cost: int, protect: frozenset[str] = frozenset()) -> bool:
        """Unload idle modules until ``cost`` more units fit under the limit.

        Victims are taken least valuable first: tertiary, then secondary,
        then primary, latest-registered first within a tier.
        """
        with self._lock:
            if self.cost_limit is None:
                return True
            if self.loaded_cost + cost <= self.cost_limit:
                return True
            idle = [
                m
                for m in self.modules.values()
                if m.state is ModuleState.LOADED and m.in_flight == 0 and m.id not in protect
            ]
            order = {mid: i for i, mid in enumerate(self.modules)}
            idle.sort(key=lambda m: (-int(m.planned_tier), -order[m.id]))
            for victim in idle:
                if self.loaded_cost + cost <= self.cost_limit:
                    break
                self._drain(victim)
            return self.loaded_cost + cost <= self.cost_limit

    def quiescent(self) -> bool:
        with self._lock:
            return all(
                m.state in (ModuleState.UNLOADED, ModuleState.LOADED) for m in self.modules.values()
            )


def apply_plan(reg: ModuleRegistry, assignment: TierAssignment) -> ReconfigReport:
    """Bring the registry in line with a tier plan.

    Tertiary modules, and any module moved to a lower tier, are drained
    first so their cost is released before primaries are loaded. Other
    secondary modules are left as they are: they load on first dispatch and
    stay until demoted.
    """
    report = ReconfigReport()
    with reg._lock:
        for sid in assignment.tier_of:
            reg._get(sid)
        reg._journal = report.transitions
        try:
            for sid, tier in assignment.tier_of.items():
                mod = reg.modules[sid]
                if mod.planned_tier is not tier:
                    report.retiered[sid] = (mod.planned_tier, tier)
                    mod.planned_tier = tier
            for sid, tier in assignment.tier_of.items():
                demoted = sid in report.retiered and report.retiered[sid][0] < tier
                if tier is Tier.TERTIARY or demoted:
                    reg.drain_and_unload(sid)
            for sid, tier in assignment.tier_of.items():
                mod = reg.modules[sid]
                if tier is Tier.SECONDARY:
                    mod.unload_requested = False
                    continue
                if tier is not Tier.PRIMARY:
                    continue
                mod.unload_requested = False
                if mod.state is ModuleState.DRAINING:
                    mod.reload_requested = True
                elif mod.state is ModuleState.UNLOADED:
                    if reg.request_load(sid) is LoadOutcome.DEFERRED:
                        report.deferred.append(sid)
        finally:
            reg._journal = None
    return report


def registry_for(
    catalog: ServiceCatalog,
    handlers: dict[str, Callable[[dict], Any]] | None = None,
    load_latency_ms: float = DEFAULT_LOAD_LATENCY_MS,
    cost_limit: int | None = None,
    on_load_started: Callable[[ServiceModule], None] | None = None,
) -> ModuleRegistry:
    reg = ModuleRegistry(cost_limit=cost_limit, on_load_started=on_load_started)
    handlers = handlers or {}
    for svc in catalog.services:
        reg.register(
            ServiceModule(
                id=svc.id,
                handler=handlers.get(svc.id),
                load_latency_ms=load_latency_ms,
                load_cost=svc.load_cost,
            )
        )
    return reg


def validate_history(history: list[Transition]) -> None:
    """Check each module's recorded transitions form a path in the lifecycle graph."""
    current: dict[str, ModuleState] = {}
    for t in history:
        prev = current.get(t.module, ModuleState.UNLOADED)
        if t.source is not prev or (t.source, t.target) not in LEGAL_TRANSITIONS:
            raise IllegalTransition(f"{t.module}: bad step {t.source.value} -> {t.target.value}")
        current[t.module] = t.target
