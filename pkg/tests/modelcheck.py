"""Reference model of one module's lifecycle, written independently of the
registry, plus helpers to drive the real registry along the same paths."""

from __future__ import annotations

from collections import deque

from adaptix.modlib import (
    IllegalTransition,
    ModuleBusy,
    ModuleRegistry,
    ModuleState,
    ServiceModule,
)

U, LG, LD, DR = "UNLOADED", "LOADING", "LOADED", "DRAINING"
OPS = ("load", "complete", "drain", "begin", "end")
ERROR = "error"


def oracle(state: tuple, op: str):
    """(lifecycle, in_flight, unload_pending) -> next state, or ERROR."""
    s, n, pending = state
    if op == "load":
        if s == DR:
            return ERROR
        return (LG, 0, False) if s == U else state
    if op == "complete":
        if s != LG:
            return ERROR
        return (U, 0, False) if pending else (LD, 0, False)
    if op == "drain":
        if s == LD:
            return (DR, n, False) if n else (U, 0, False)
        if s == LG:
            return (LG, 0, True)
        return state
    if op == "begin":
        return (LD, n + 1, pending) if s == LD else ERROR
    if op == "end":
        if n == 0:
            return ERROR
        if s == DR and n == 1:
            return (U, 0, False)
        return (s, n - 1, pending)
    raise ValueError(op)


def new_registry(ids=("m",), cost_limit=None) -> ModuleRegistry:
    reg = ModuleRegistry(cost_limit=cost_limit)
    for mid in ids:
        reg.register(ServiceModule(mid, load_cost=1))
    return reg


def apply(reg: ModuleRegistry, mid: str, op: str) -> bool:
    """Run ``op`` on the registry; False if it was refused."""
    try:
        if op == "load":
            reg.request_load(mid)
        elif op == "complete":
            reg.complete_load(mid)
        elif op == "drain":
            reg.drain_and_unload(mid)
        elif op == "begin":
            reg.begin(mid)
        elif op == "end":
            reg.end(mid)
        else:
            raise ValueError(op)
    except (IllegalTransition, ModuleBusy):
        return False
    return True


def observe(reg: ModuleRegistry, mid: str = "m") -> tuple:
    m = reg.modules[mid]
    return (m.state.value, m.in_flight, m.unload_requested)


def bfs(depth: int, step, start, ops=OPS):
    """Reachable states within ``depth`` steps, with one witness path each."""
    seen = {start: ()}
    frontier = deque([(start, ())])
    while frontier:
        state, path = frontier.popleft()
        if len(path) == depth:
            continue
        for op in ops:
            nxt = step(state, op)
            if nxt == ERROR or nxt in seen:
                continue
            seen[nxt] = path + (op,)
            frontier.append((nxt, path + (op,)))
    return seen


def check_invariants(reg: ModuleRegistry) -> None:
    assert reg.loaded_cost == reg.recomputed_cost()
    for m in reg.modules.values():
        assert m.in_flight >= 0
        if m.in_flight > 0:
            assert m.state in (ModuleState.LOADED, ModuleState.DRAINING)
        if m.state is ModuleState.UNLOADED:
            assert m.in_flight == 0
