"""Demographic service tiering for an overloaded banking gateway.

Services are placed in primary, secondary and tertiary tiers per age
segment under a load-cost budget; the gateway schedules by tier with aging,
and an adaptation loop moves the budget with measured utilization.
"""

__version__ = "0.1.0"

from .catalog import ServiceCatalog, ServiceDescriptor, default_catalog, load_catalog
from .profiles import Occupation, Segment, UserProfile, classify
from .tiering import Tier, TierAssignment, assign_tiers, diff_plans
from .modlib import ModuleRegistry, ModuleState, apply_plan
from .gateway import Gateway, QueueConfig, Request, Response
from .adapt import AdaptPolicy, Decision, decide
from .sim import SimConfig, SimReport, compare, load_scenario, replay, run

__all__ = [
    "AdaptPolicy",
    "Decision",
    "Gateway",
    "ModuleRegistry",
    "ModuleState",
    "Occupation",
    "QueueConfig",
    "Request",
    "Response",
    "Segment",
    "ServiceCatalog",
    "ServiceDescriptor",
    "SimConfig",
    "SimReport",
    "Tier",
    "TierAssignment",
    "UserProfile",
    "apply_plan",
    "assign_tiers",
    "classify",
    "compare",
    "decide",
    "default_catalog",
    "diff_plans",
    "load_catalog",
    "load_scenario",
    "replay",
    "run",
]
