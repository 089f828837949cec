"""Service catalog: the banking services a gateway can offer.

Catalog files are UTF-8 JSON::

    {"segments": ["18-25", ...],
     "services": [{"id", "display_name", "load_cost", "service_time_ms",
                   "usage_score": {"18-25": 95, ...}}, ...]}

List order is significant: it breaks ties between equally scored services.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from types import MappingProxyType
from typing import Mapping

from .profiles import Segment

_ID_RE = re.compile(r"^[a-z0-9_]+$")


class CatalogError(ValueError):
    pass


class MissingFile(CatalogError):
    pass


class ParseError(CatalogError):
    def __init__(self, message: str, line: int | None = None):
        super().__init__(f"line {line}: {message}" if line is not None else message)
        self.line = line


class DuplicateServiceId(CatalogError):
    def __init__(self, service_id: str):
        super().__init__(f"duplicate service id {service_id!r}")
        self.service_id = service_id


class MissingSegmentScore(CatalogError):
    def __init__(self, service_id: str, segment: str):
        super().__init__(f"service {service_id!r} has no usage score for segment {segment!r}")
        self.service_id = service_id
        self.segment = segment


class UnknownService(KeyError):
    def __init__(self, service_id: str):
        super().__init__(service_id)
        self.service_id = service_id

    def __str__(self):
        return f"unknown service {self.service_id!r}"


@dataclass(frozen=True)
class ServiceDescriptor:
    id: str
    display_name: str
    load_cost: int = 1
    service_time_ms: float = 10.0
    usage_score: Mapping[Segment, int] = field(default_factory=dict)

    def __post_init__(self):
        if not _ID_RE.match(self.id):
            raise CatalogError(f"invalid service id {self.id!r}")
        if int(self.load_cost) != self.load_cost or self.load_cost < 1:
            raise CatalogError(f"{self.id}: load_cost must be a positive integer")
        if not self.service_time_ms > 0:
            raise CatalogError(f"{self.id}: service_time_ms must be positive")
        if any(v < 0 for v in self.usage_score.values()):
            raise CatalogError(f"{self.id}: usage scores must be non-negative")
        object.__setattr__(self, "usage_score", MappingProxyType(dict(self.usage_score)))

    def to_dict(self) -> dict:
        return {
            "id": self.id,
            "display_name": self.display_name,
            "load_cost": self.load_cost,
            "service_time_ms": self.service_time_ms,
            "usage_score": {seg.label: score for seg, score in self.usage_score.items()},
        }


@dataclass(frozen=True)
class ServiceCatalog:
    services: tuple[ServiceDescriptor, ...] = ()
    segments: tuple[Segment, ...] = tuple(Segment)

    def __post_init__(self):
        object.__setattr__(self, "services", tuple(self.services))
        object.__setattr__(self, "segments", tuple(self.segments))
        seen = set()
        for svc in self.services:
            if svc.id in seen:
                raise DuplicateServiceId(svc.id)
            seen.add(svc.id)
            for seg in self.segments:
                if seg not in svc.usage_score:
                    raise MissingSegmentScore(svc.id, seg.label)
        object.__setattr__(self, "_index", {s.id: s for s in self.services})

    def __len__(self):
        return len(self.services)

    def __iter__(self):
        return iter(self.services)

    def __contains__(self, service_id) -> bool:
        return service_id in self._index

    @property
    def ids(self) -> list[str]:
        return [s.id for s in self.services]

    @property
    def total_cost(self) -> int:
        return sum(s.load_cost for s in self.services)

    def position(self, service_id: str) -> int:
        return self.ids.index(service_id)

    def to_dict(self) -> dict:
        return {
            "segments": [seg.label for seg in self.segments],
            "services": [s.to_dict() for s in self.services],
        }


def service(catalog: ServiceCatalog, service_id: str) -> ServiceDescriptor:
    try:
        return catalog._index[service_id]
    except KeyError:
        raise UnknownService(service_id) from None


def serialize(catalog: ServiceCatalog) -> str:
    return json.dumps(catalog.to_dict(), indent=2) + "\n"


def parse_catalog(text: str) -> ServiceCatalog:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, exc.lineno) from exc
    if not isinstance(data, dict):
        raise ParseError("top level must be an object", 1)
    try:
        segments = tuple(Segment.parse(s) for s in data.get("segments", [s.label for s in Segment]))
    except ValueError as exc:
        raise CatalogError(str(exc)) from exc
    labels = {seg.label: seg for seg in segments}
    services = []
    seen = set()
    for entry in data.get("services", []):
        if not isinstance(entry, dict) or "id" not in entry:
            raise CatalogError(f"malformed service entry: {entry!r}")
        sid = entry["id"]
        if sid in seen:
            raise DuplicateServiceId(sid)
        seen.add(sid)
        raw_scores = entry.get("usage_score", {})
        scores = {}
        for seg in segments:
            if seg.label in raw_scores:
                scores[seg] = raw_scores[seg.label]
            elif seg.name in raw_scores:
                scores[seg] = raw_scores[seg.name]
            else:
                raise MissingSegmentScore(sid, seg.label)
        unknown = set(raw_scores) - set(labels) - {seg.name for seg in segments}
        if unknown:
            raise CatalogError(f"{sid}: scores for undeclared segments {sorted(unknown)}")
        services.append(
            ServiceDescriptor(
                id=sid,
                display_name=entry.get("display_name", sid.replace("_", " ").title()),
                load_cost=entry.get("load_cost", 1),
                service_time_ms=entry.get("service_time_ms", 10.0),
                usage_score=scores,
            )
        )
    return ServiceCatalog(tuple(services), segments)


def load_catalog(path: str | Path | None = None) -> ServiceCatalog:
    """Load and validate a catalog file; ``None`` loads the bundled default."""
    if path is None:
        text = resources.files("adaptix").joinpath("data/catalog.json").read_text("utf-8")
        return parse_catalog(text)
    p = Path(path)
    if not p.is_file():
        raise MissingFile(f"catalog file not found: {p}")
    return parse_catalog(p.read_text(encoding="utf-8"))


def default_catalog() -> ServiceCatalog:
    return load_catalog(None)
