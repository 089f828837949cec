"""Monitor / decide / reconfigure loop that moves the load budget."""

from __future__ import annotations

import json
import logging
from dataclasses import asdict, dataclass
from enum import Enum
from typing import Sequence

from .gateway import Gateway
from .metrics import MetricsWindow
from .modlib import ModuleRegistry, ReconfigReport

log = logging.getLogger(__name__)

__all__ = [
    "AdaptPolicy",
    "Decision",
    "DecisionKind",
    "InvalidPolicy",
    "MetricsWindow",
    "decide",
    "observe",
    "reconfigure",
]


class InvalidPolicy(ValueError):
    pass


@dataclass(frozen=True)
class AdaptPolicy:
    high_watermark: float = 0.8
    low_watermark: float = 0.5
    consecutive_windows: int = 3
    step: int = 5
    min_budget: int = 5
    max_budget: int = 30

    def validate(self) -> None:
        if not 0 < self.low_watermark < self.high_watermark <= 1:
            raise InvalidPolicy("need 0 < low_watermark < high_watermark <= 1")
        if self.step < 1:
            raise InvalidPolicy("step must be >= 1")
        if self.consecutive_windows < 1:
            raise InvalidPolicy("consecutive_windows must be >= 1")
        if not 0 <= self.min_budget <= self.max_budget:
            raise InvalidPolicy("need 0 <= min_budget <= max_budget")

    def clamp(self, budget: int) -> int:
        return max(self.min_budget, min(self.max_budget, budget))

    @classmethod
    def from_dict(cls, data: dict | None) -> AdaptPolicy:
        try:
            policy = cls(**(data or {}))
        except TypeError as exc:
            raise InvalidPolicy(str(exc)) from exc
        policy.validate()
        return policy

    def to_dict(self) -> dict:
        return asdict(self)


class DecisionKind(Enum):
    HOLD = "Hold"
    LOWER = "LowerThreshold"
    RAISE = "RaiseThreshold"


@dataclass(frozen=True)
class Decision:
    kind: DecisionKind
    new_budget: int | None = None

    @classmethod
    def hold(cls) -> Decision:
        return cls(DecisionKind.HOLD)

    def to_dict(self) -> dict:
        out = {"kind": self.kind.value}
        if self.new_budget is not None:
            out["new_budget"] = self.new_budget
        return out


def decide(history: Sequence[MetricsWindow | float], policy: AdaptPolicy, current_budget: int) -> Decision:
    """Pick the next budget move from the most recent windows.

    ``history`` runs oldest to newest and may hold windows or bare
    utilization values. A move that the clamp turns into a no-op is a Hold.
    """
    policy.validate()
    k = policy.consecutive_windows
    if len(history) < k:
        return Decision.hold()
    recent = [h.utilization if isinstance(h, MetricsWindow) else float(h) for h in history[-k:]]
    if all(u > policy.high_watermark for u in recent):
        kind, target = DecisionKind.LOWER, policy.clamp(current_budget - policy.step)
    elif all(u < policy.low_watermark for u in recent):
        kind, target = DecisionKind.RAISE, policy.clamp(current_budget + policy.step)
    else:
        return Decision.hold()
    if target == current_budget:
        return Decision.hold()
    return Decision(kind, target)


def observe(gw: Gateway, now_us: int) -> MetricsWindow:
    return gw.observe(now_us)


def reconfigure(gw: Gateway, reg: ModuleRegistry | None, d: Decision) -> ReconfigReport:
    if d.kind is DecisionKind.HOLD:
        return ReconfigReport()
    if reg is not None and reg is not gw.registry:
        raise ValueError("registry does not belong to this gateway")
    report = gw.set_budget(d.new_budget)
    log.info(json.dumps({"event": "reconfigure", **d.to_dict(), "transitions": len(report.transitions)}))
    return report


class Adapter:
    """Holds the window history for one gateway and applies decisions."""

    def __init__(self, gw: Gateway, policy: AdaptPolicy | None = None):
        self.gw = gw
        self.policy = policy or AdaptPolicy()
        self.policy.validate()
        self.history: list[MetricsWindow] = []
        self.decisions: list[Decision] = []

    def tick(self, now_us: int) -> tuple[MetricsWindow, Decision, ReconfigReport]:
        window = self.gw.roll_window(now_us)
        self.history.append(window)
        d = decide(self.history, self.policy, self.gw.budget)
        self.decisions.append(d)
        report = reconfigure(self.gw, None, d)
        return window, d, report
