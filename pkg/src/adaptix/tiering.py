"""Threshold-budgeted tier planning.

A tier plan splits the catalog into PRIMARY (preloaded), SECONDARY (loaded
on first use) and TERTIARY (loaded on demand, unloaded after use) for one
segment under a load budget.

Packing is greedy over services ranked by the segment's usage score, ties
broken by catalog order. The plan for budget ``b`` is grown from the plan
for ``b - 1``: at each unit step the primary pass first-fits the ranked
services under ``floor(b * primary_fraction)``, then the secondary pass
takes the next ranked non-resident services while the resident total stays
within ``b``. Growing the plan step by step is what makes it monotone in
the budget; packing every budget from scratch is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum
from types import MappingProxyType
from typing import Iterable, Mapping

from .catalog import ServiceCatalog, UnknownService
from .profiles import Segment

PRIMARY_FRACTION = 0.4


class Tier(IntEnum):
    PRIMARY = 0
    SECONDARY = 1
    TERTIARY = 2

    @property
    def label(self) -> str:
        return self.name.lower()


class UnknownSegment(KeyError):
    pass


class CatalogMismatch(ValueError):
    pass


@dataclass(frozen=True)
class TierAssignment:
    segment: Segment | None
    threshold: int
    tier_of: Mapping[str, Tier] = field(default_factory=dict)

    def __post_init__(self):
        if self.threshold < 0:
            raise ValueError("threshold must be non-negative")
        object.__setattr__(self, "tier_of", MappingProxyType(dict(self.tier_of)))

    def members(self, tier: Tier) -> list[str]:
        return [sid for sid, t in self.tier_of.items() if t is tier]

    @property
    def primary(self) -> set[str]:
        return set(self.members(Tier.PRIMARY))

    @property
    def secondary(self) -> set[str]:
        return set(self.members(Tier.SECONDARY))

    @property
    def tertiary(self) -> set[str]:
        return set(self.members(Tier.TERTIARY))

    def to_dict(self) -> dict:
        return {
            "segment": self.segment.label if self.segment else None,
            "threshold": self.threshold,
            "tiers": {t.label: self.members(t) for t in Tier},
        }

    def __eq__(self, other):
        if not isinstance(other, TierAssignment):
            return NotImplemented
        return (self.segment, self.threshold, dict(self.tier_of)) == (
            other.segment,
            other.threshold,
            dict(other.tier_of),
        )

    __hash__ = None


@dataclass(frozen=True)
class PlanDelta:
    to_load: frozenset[str] = frozenset()
    to_lazy: frozenset[str] = frozenset()
    to_unload: frozenset[str] = frozenset()

    def __bool__(self):
        return bool(self.to_load or self.to_lazy or self.to_unload)

    def to_dict(self) -> dict:
        return {
            "to_load": sorted(self.to_load),
            "to_lazy": sorted(self.to_lazy),
            "to_unload": sorted(self.to_unload),
        }


def primary_cap(budget: int, fraction: float = PRIMARY_FRACTION) -> int:
    # epsilon guards products like 0.4 * 20 landing just under an integer
    return math.floor(budget * fraction + 1e-9)


def ranked_services(catalog: ServiceCatalog, segment: Segment) -> list[str]:
    if segment not in catalog.segments:
        raise UnknownSegment(segment)
    order = list(enumerate(catalog.services))
    order.sort(key=lambda pair: (-pair[1].usage_score[segment], pair[0]))
    return [svc.id for _, svc in order]


def assign_tiers(
    catalog: ServiceCatalog,
    segment: Segment | str,
    threshold: int,
    primary_fraction: float = PRIMARY_FRACTION,
) -> TierAssignment:
    segment = Segment.parse(segment)
    threshold = int(threshold)
    if threshold < 0:
        raise ValueError("threshold must be non-negative")
    order = ranked_services(catalog, segment)
    cost = {s.id: s.load_cost for s in catalog.services}

    primary: set[str] = set()
    resident: set[str] = set()
    primary_cost = resident_cost = 0
    total = catalog.total_cost
    # once both caps cover the whole catalog the plan can no longer change
    saturated = total if primary_fraction <= 0 else max(total, math.ceil(total / primary_fraction))
    for budget in range(min(threshold, saturated + 1) + 1):
        cap = primary_cap(budget, primary_fraction)
        for sid in order:
            if sid in primary:
                continue
            extra = 0 if sid in resident else cost[sid]
            if primary_cost + cost[sid] <= cap and resident_cost + extra <= budget:
                primary.add(sid)
                resident.add(sid)
                primary_cost += cost[sid]
                resident_cost += extra
        for sid in order:
            if sid in resident:
                continue
            if resident_cost + cost[sid] > budget:
                break
            resident.add(sid)
            resident_cost += cost[sid]

    tiers = {}
    for sid in catalog.ids:
        if sid in primary:
            tiers[sid] = Tier.PRIMARY
        elif sid in resident:
            tiers[sid] = Tier.SECONDARY
        else:
            tiers[sid] = Tier.TERTIARY
    return TierAssignment(segment, threshold, tiers)


def tier_of(assignment: TierAssignment, service_id: str) -> Tier:
    try:
        return assignment.tier_of[service_id]
    except KeyError:
        raise UnknownService(service_id) from None


def diff_plans(old: TierAssignment, new: TierAssignment) -> PlanDelta:
    """Tier moves needed to go from ``old`` to ``new``."""
    if set(old.tier_of) != set(new.tier_of):
        raise CatalogMismatch("assignments cover different service sets")
    load, lazy, unload = set(), set(), set()
    for sid, tier in new.tier_of.items():
        if tier is old.tier_of[sid]:
            continue
        {Tier.PRIMARY: load, Tier.SECONDARY: lazy, Tier.TERTIARY: unload}[tier].add(sid)
    return PlanDelta(frozenset(load), frozenset(lazy), frozenset(unload))


def apply_delta(assignment: TierAssignment, delta: PlanDelta, threshold: int | None = None) -> TierAssignment:
    tiers = dict(assignment.tier_of)
    for ids, tier in ((delta.to_load, Tier.PRIMARY), (delta.to_lazy, Tier.SECONDARY), (delta.to_unload, Tier.TERTIARY)):
        for sid in ids:
            if sid not in tiers:
                raise UnknownService(sid)
            tiers[sid] = tier
    return TierAssignment(
        assignment.segment,
        assignment.threshold if threshold is None else threshold,
        tiers,
    )


def merge_assignments(plans: Iterable[TierAssignment]) -> TierAssignment:
    """Most favourable tier per service across several segment plans."""
    plans = list(plans)
    if not plans:
        return TierAssignment(None, 0, {})
    merged = dict(plans[0].tier_of)
    for plan in plans[1:]:
        if set(plan.tier_of) != set(merged):
            raise CatalogMismatch("assignments cover different service sets")
        for sid, tier in plan.tier_of.items():
            merged[sid] = min(merged[sid], tier)
    return TierAssignment(None, max(p.threshold for p in plans), merged)


def plan_table(assignment: TierAssignment, catalog: ServiceCatalog | None = None) -> str:
    """Three columns (tier, load cost, services), one row per tier.

    The cost column needs the catalog; without one it shows ``-``.
    """
    cost = {s.id: s.load_cost for s in catalog.services} if catalog is not None else None
    width = max(len(t.name) for t in Tier) + 2
    rows = [f"{'TIER'.ljust(width)}{'COST':<6}SERVICES"]
    for t in Tier:
        members = assignment.members(t)
        total = str(sum(cost[s] for s in members)) if cost is not None else "-"
        rows.append((t.name.ljust(width) + total.ljust(6) + (", ".join(members) if members else "-")).rstrip())
    return "\n".join(rows)
