"""Deterministic discrete-event simulation of the gateway.

A seeded workload (Poisson arrivals per client, exponential service
times) is generated once and then fed to a gateway on a virtual clock in
integer microseconds. ADAPTIVE runs the tiered gateway with the adaptation
loop; STATIC is the baseline with one FIFO queue and every module
preloaded. ``compare`` feeds the same workload to both.
"""

from __future__ import annotations

import csv
import hashlib
import heapq
import io
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import numpy as np

from .adapt import AdaptPolicy, Adapter, InvalidPolicy
from .catalog import CatalogError, ServiceCatalog, load_catalog, parse_catalog
from .gateway import DispatchStep, Gateway, QueueConfig, Request
from .metrics import percentile
from .modlib import DEFAULT_LOAD_LATENCY_MS, registry_for
from .profiles import (
    InvalidDistribution,
    Occupation,
    PopulationDistribution,
    Segment,
    UserProfile,
    classify,
    default_distribution,
    sample_population,
)
from .tiering import PRIMARY_FRACTION, Tier

log = logging.getLogger(__name__)

TRACE_FORMAT = "adaptix-trace"
TRACE_VERSION = 1

# event kinds, in tie-break order at equal timestamps
LOAD_DONE, COMPLETE, ARRIVAL, WINDOW = 0, 1, 2, 3


class InvalidConfig(ValueError):
    pass


class TraceVersionMismatch(ValueError):
    pass


class TraceChecksumError(ValueError):
    pass


@dataclass
class SimConfig:
    seed: int = 42
    mode: str = "ADAPTIVE"
    n_clients: int = 100
    duration_ms: float = 10_000.0
    arrival_rate_per_client: float = 1.0
    population: PopulationDistribution = field(default_factory=default_distribution)
    service_mix: dict[Segment, dict[str, float]] | None = None
    queue: QueueConfig = field(default_factory=QueueConfig)
    policy: AdaptPolicy = field(default_factory=AdaptPolicy)
    initial_budget: int = 20
    primary_fraction: float = PRIMARY_FRACTION
    load_latency_ms: float = DEFAULT_LOAD_LATENCY_MS
    window_ms: float = 1000.0
    adaptive: bool = True
    # resident-cost ceiling for ADAPTIVE; None means policy.max_budget
    resident_limit: int | None = None
    catalog: Any = None  # path, inline dict, or None for the bundled catalog

    def validate(self) -> None:
        if self.mode not in ("ADAPTIVE", "STATIC"):
            raise InvalidConfig(f"mode must be ADAPTIVE or STATIC, not {self.mode!r}")
        if self.n_clients < 0 or self.arrival_rate_per_client < 0:
            raise InvalidConfig("n_clients and arrival_rate_per_client must be >= 0")
        if not self.duration_ms > 0 or not self.window_ms > 0:
            raise InvalidConfig("duration_ms and window_ms must be positive")
        if self.load_latency_ms < 0:
            raise InvalidConfig("load_latency_ms must be >= 0")
        if self.initial_budget < 0:
            raise InvalidConfig("initial_budget must be >= 0")
        try:
            self.policy.validate()
            self.population.validate()
        except (InvalidPolicy, InvalidDistribution) as exc:
            raise InvalidConfig(str(exc)) from exc
        for seg, mix in (self.service_mix or {}).items():
            if any(w < 0 for w in mix.values()) or not any(w > 0 for w in mix.values()):
                raise InvalidConfig(f"service mix for {seg.label} needs non-negative weights, one positive")

    def load_catalog(self) -> ServiceCatalog:
        try:
            if isinstance(self.catalog, dict):
                return parse_catalog(json.dumps(self.catalog))
            return load_catalog(self.catalog)
        except CatalogError as exc:
            raise InvalidConfig(str(exc)) from exc

    def to_dict(self) -> dict:
        return {
            "seed": self.seed,
            "mode": self.mode,
            "n_clients": self.n_clients,
            "duration_ms": self.duration_ms,
            "arrival_rate_per_client": self.arrival_rate_per_client,
            "population": self.population.to_dict(),
            "service_mix": None
            if self.service_mix is None
            else {seg.label: dict(mix) for seg, mix in self.service_mix.items()},
            "gateway": {
                "workers": self.queue.workers,
                "aging_limit_ms": self.queue.aging_limit_ms,
                "capacity_per_tier": {t.label: c for t, c in self.queue.capacity_per_tier.items()},
            },
            "adapt": self.policy.to_dict(),
            "initial_budget": self.initial_budget,
            "primary_fraction": self.primary_fraction,
            "load_latency_ms": self.load_latency_ms,
            "window_ms": self.window_ms,
            "adaptive": self.adaptive,
            "resident_limit": self.resident_limit,
            "catalog": self.catalog if isinstance(self.catalog, (dict, type(None))) else str(self.catalog),
        }

    @classmethod
    def from_dict(cls, data: dict) -> SimConfig:
        data = dict(data)
        known = {
            "seed", "mode", "n_clients", "duration_ms", "arrival_rate_per_client", "population",
            "service_mix", "gateway", "adapt", "initial_budget", "primary_fraction",
            "load_latency_ms", "window_ms", "adaptive", "resident_limit", "catalog", "description",
        }
        unknown = set(data) - known
        if unknown:
            raise InvalidConfig(f"unknown scenario keys: {sorted(unknown)}")
        data.pop("description", None)
        try:
            if "population" in data and data["population"] is not None:
                data["population"] = PopulationDistribution.from_dict(data["population"])
            else:
                data.pop("population", None)
            mix = data.pop("service_mix", None)
            if mix is not None:
                data["service_mix"] = {Segment.parse(k): {s: float(w) for s, w in v.items()} for k, v in mix.items()}
            gw = data.pop("gateway", None) or {}
            caps = gw.get("capacity_per_tier")
            if caps is not None:
                caps = {Tier[k.upper()]: (None if v is None else int(v)) for k, v in caps.items()}
            data["queue"] = QueueConfig(
                **({"capacity_per_tier": caps} if caps is not None else {}),
                **{k: gw[k] for k in ("aging_limit_ms", "workers") if k in gw},
            )
            data["policy"] = AdaptPolicy.from_dict(data.pop("adapt", None))
            cfg = cls(**data)
        except (TypeError, KeyError, ValueError) as exc:
            raise InvalidConfig(f"bad scenario: {exc}") from exc
        cfg.validate()
        return cfg


def load_scenario(path: str | Path) -> SimConfig:
    p = Path(path)
    if not p.is_file():
        raise InvalidConfig(f"scenario file not found: {p}")
    try:
        data = json.loads(p.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise InvalidConfig(f"{p}: line {exc.lineno}: {exc.msg}") from exc
    cat = data.get("catalog")
    if isinstance(cat, str) and not Path(cat).is_absolute():
        data["catalog"] = str((p.parent / cat).resolve())
    return SimConfig.from_dict(data)


# -- workload ----------------------------------------------------------


@dataclass
class Workload:
    users: list[UserProfile]
    arrival_us: np.ndarray
    client: np.ndarray
    service: list[str]
    service_us: np.ndarray

    def __len__(self):
        return len(self.arrival_us)


def default_mix(catalog: ServiceCatalog) -> dict[Segment, dict[str, float]]:
    return {
        seg: {s.id: float(s.usage_score[seg]) for s in catalog.services}
        for seg in catalog.segments
    }


def offered_load(cfg: SimConfig, catalog: ServiceCatalog | None = None) -> float:
    """Expected work arriving per unit of worker capacity."""
    catalog = catalog or cfg.load_catalog()
    mix = cfg.service_mix or default_mix(catalog)
    st = {s.id: s.service_time_ms for s in catalog.services}
    seg_w = {s: cfg.population.age_weights.get(s, 0.0) for s in Segment}
    total_w = sum(seg_w.values())
    mean_ms = 0.0
    for seg, w in seg_w.items():
        if w <= 0 or seg not in mix:
            continue
        m = mix[seg]
        tot = sum(m.values())
        mean_ms += (w / total_w) * sum(st[s] * v / tot for s, v in m.items())
    rate = cfg.n_clients * cfg.arrival_rate_per_client / 1000.0
    return rate * mean_ms / cfg.queue.workers


def generate_workload(cfg: SimConfig, catalog: ServiceCatalog) -> Workload:
    seeds = np.random.SeedSequence(cfg.seed).spawn(3)
    pop_seed = int(seeds[0].generate_state(1, dtype=np.uint64)[0])
    users = sample_population(cfg.population, cfg.n_clients, pop_seed)
    rng_arr = np.random.default_rng(seeds[1])
    rng_svc = np.random.default_rng(seeds[2])

    horizon_us = int(round(cfg.duration_ms * 1000))
    rate = cfg.arrival_rate_per_client
    times, owners = [], []
    for i in range(cfg.n_clients):
        # a Poisson process on [0, T): Poisson count, then uniform order statistics
        k = int(rng_arr.poisson(rate * horizon_us / 1e6)) if rate > 0 else 0
        t = np.sort(np.floor(rng_arr.uniform(0, horizon_us, size=k)).astype(np.int64))
        times.append(t)
        owners.append(np.full(k, i, dtype=np.int64))
    arrival = np.concatenate(times) if times else np.empty(0, dtype=np.int64)
    client = np.concatenate(owners) if owners else np.empty(0, dtype=np.int64)
    order = np.lexsort((client, arrival))
    arrival, client = arrival[order], client[order]

    mix = cfg.service_mix or default_mix(catalog)
    known = set(catalog.ids)
    tables = {}
    for seg in Segment:
        m = mix.get(seg)
        if m is None:
            continue
        ids = [s for s in catalog.ids if m.get(s, 0) > 0]
        bad = set(m) - known
        if bad:
            raise InvalidConfig(f"service mix names unknown services {sorted(bad)}")
        w = np.array([m[s] for s in ids], dtype=float)
        tables[seg] = (ids, w / w.sum())
    segs = [classify(u) for u in users]
    mean_us = {s.id: s.service_time_ms * 1000.0 for s in catalog.services}
    services: list[str] = []
    for idx in client.tolist():
        seg = segs[idx]
        if seg not in tables:
            raise InvalidConfig(f"no service mix for segment {seg.label}")
        ids, p = tables[seg]
        services.append(ids[int(rng_svc.choice(len(ids), p=p))])
    draws = rng_svc.exponential(1.0, size=len(services))
    service_us = np.array(
        [max(1, int(round(d * mean_us[s]))) for d, s in zip(draws.tolist(), services)],
        dtype=np.int64,
    )
    return Workload(users, arrival, client, services, service_us)


# -- engine ------------------------------------------------------------


@dataclass
class RequestRecord:
    request_id: int
    service: str
    tier: Tier | None
    arrival_us: int
    scheduled_us: int = -1
    finish_us: int = -1
    rejected: bool = False


class Simulation:
    """One run of a gateway on the virtual clock."""

    def __init__(self, cfg: SimConfig, catalog: ServiceCatalog, workload: Workload, mode: str | None = None):
        cfg.validate()
        self.cfg = cfg
        self.mode = mode or cfg.mode
        self.catalog = catalog
        self.workload = workload
        self.now = 0
        self.horizon = int(round(cfg.duration_ms * 1000))
        self.window_us = int(round(cfg.window_ms * 1000))
        self._events: list = []
        self._seq = 0
        self.events_processed = 0
        static = self.mode == "STATIC"
        limit = None
        if not static:
            limit = cfg.resident_limit if cfg.resident_limit is not None else cfg.policy.max_budget
        self.load_latency_us = int(round(cfg.load_latency_ms * 1000))
        self.registry = registry_for(
            catalog,
            load_latency_ms=cfg.load_latency_ms,
            cost_limit=limit,
            on_load_started=self._load_started,
        )
        self.gw = Gateway(
            catalog,
            self.registry,
            budget=cfg.initial_budget,
            queue=cfg.queue,
            fifo=static,
            primary_fraction=cfg.primary_fraction,
        )
        self.adapter = Adapter(self.gw, cfg.policy) if (not static and cfg.adaptive) else None
        self.records: list[RequestRecord] = []
        self.windows: list[dict] = []
        self.budget_timeline: list[int] = []
        self.decisions: list[dict] = []
        self.last_time = 0

    def _push(self, t: int, kind: int, payload) -> None:
        heapq.heappush(self._events, (t, kind, self._seq, payload))
        self._seq += 1

    def _load_started(self, mod) -> None:
        if self.load_latency_us == 0:
            self.registry.complete_load(mod.id)
        else:
            self._push(self.now + self.load_latency_us, LOAD_DONE, mod.id)

    def _dispatch(self, req: Request) -> None:
        step = self.gw.begin_dispatch(req, self.now)
        if step is DispatchStep.READY:
            self._push(self.now + req.service_us, COMPLETE, req)

    def _pump(self) -> None:
        gw = self.gw
        workers = gw.queue.workers
        while gw.metrics.busy < workers:
            req = gw.schedule_next(self.now)
            if req is None:
                break
            rec = self.records[req.request_id]
            if rec.scheduled_us < 0:
                rec.scheduled_us = self.now
            self._dispatch(req)

    def _window(self) -> None:
        if self.adapter is not None:
            window, decision, report = self.adapter.tick(self.now)
            self.decisions.append({"t_ms": self.now / 1000.0, **decision.to_dict()})
        else:
            window = self.gw.roll_window(self.now)
        row = window.to_dict()
        row["budget"] = self.gw.budget
        row["loaded_cost"] = self.registry.loaded_cost
        self.windows.append(row)
        self.budget_timeline.append(self.gw.budget)

    def run(self) -> SimReport:
        wl = self.workload
        arrivals = wl.arrival_us.tolist()
        clients = wl.client.tolist()
        services = wl.service
        svc_us = wl.service_us.tolist()
        n = len(arrivals)
        nxt = 0
        t = self.window_us
        while t < self.horizon:
            self._push(t, WINDOW, None)
            t += self.window_us
        self._push(self.horizon, WINDOW, None)

        events = self._events
        while True:
            take_arrival = nxt < n and (not events or (arrivals[nxt], ARRIVAL) < events[0][:2])
            if take_arrival:
                now, kind, payload = arrivals[nxt], ARRIVAL, nxt
                nxt += 1
            elif events:
                now, kind, _, payload = events[0]
            else:
                break
            final_window = kind == WINDOW and now == self.horizon
            if now >= self.horizon and not final_window:
                break
            if not take_arrival:
                heapq.heappop(events)
            if now < self.now:
                raise RuntimeError("virtual clock moved backwards")
            self.now = now
            self.events_processed += 1

            if kind == ARRIVAL:
                idx = payload
                req = Request(
                    request_id=idx,
                    user=wl.users[clients[idx]],
                    service=services[idx],
                    arrival_us=now,
                    service_us=svc_us[idx],
                )
                adm = self.gw.admit(req, now)
                self.records.append(RequestRecord(idx, req.service, req.tier, now, rejected=not adm))
            elif kind == COMPLETE:
                req = payload
                self.gw.finish(req, now)
                self.records[req.request_id].finish_us = now
            elif kind == LOAD_DONE:
                sid = payload
                self.registry.complete_load(sid)
                self.gw.load_finished(sid)
                self.gw.unpark()
            else:
                self._window()
                self.gw.unpark()
                if final_window:
                    break
            self._pump()
        return self._report()

    def _report(self) -> SimReport:
        recs = self.records
        served = [r for r in recs if r.finish_us >= 0]
        lat = {t: [] for t in Tier}
        overall = []
        for r in served:
            ms = (r.finish_us - r.arrival_us) / 1000.0
            lat[r.tier].append(ms)
            overall.append(ms)
        waits = {t: 0.0 for t in Tier}
        for r in recs:
            if r.rejected:
                continue
            start = r.scheduled_us if r.scheduled_us >= 0 else self.horizon
            waits[r.tier] = max(waits[r.tier], (start - r.arrival_us) / 1000.0)
        area = 0
        for r in recs:
            if not r.rejected:
                end = r.finish_us if r.finish_us >= 0 else self.horizon
                area += end - r.arrival_us
        rejected_by_tier = {t.label: 0 for t in Tier}
        for r in recs:
            if r.rejected and r.tier is not None:
                rejected_by_tier[r.tier.label] += 1
        peak = self.registry.peak_cost
        return SimReport(
            mode=self.mode,
            seed=self.cfg.seed,
            arrivals=len(recs),
            served=self.gw.served,
            rejected=self.gw.rejected,
            in_queue_at_end=self.gw.admitted - self.gw.served,
            failed=self.gw.failed,
            latency_ms={"overall": _summary(overall), **{t.label: _summary(lat[t]) for t in Tier}},
            max_wait_ms={t.label: round(waits[t], 3) for t in Tier},
            rejected_by_tier=rejected_by_tier,
            mean_in_system=area / self.horizon if self.horizon else 0.0,
            utilization_timeline=[w["utilization"] for w in self.windows],
            budget_timeline=list(self.budget_timeline),
            decisions=list(self.decisions),
            peak_loaded_cost=peak,
            windows=list(self.windows),
            events=self.events_processed,
            requests=recs,
        )


def _summary(values: list[float]) -> dict:
    if not values:
        return {"count": 0, "mean": 0.0, "p50": 0.0, "p95": 0.0}
    return {
        "count": len(values),
        "mean": round(float(np.mean(values)), 3),
        "p50": round(percentile(values, 50), 3),
        "p95": round(percentile(values, 95), 3),
    }


@dataclass
class SimReport:
    mode: str
    seed: int
    arrivals: int = 0
    served: int = 0
    rejected: int = 0
    in_queue_at_end: int = 0
    failed: int = 0
    latency_ms: dict = field(default_factory=dict)
    max_wait_ms: dict = field(default_factory=dict)
    rejected_by_tier: dict = field(default_factory=dict)
    mean_in_system: float = 0.0
    utilization_timeline: list = field(default_factory=list)
    budget_timeline: list = field(default_factory=list)
    decisions: list = field(default_factory=list)
    peak_loaded_cost: int = 0
    windows: list = field(default_factory=list)
    events: int = 0
    requests: list = field(default_factory=list, repr=False)

    @classmethod
    def empty(cls, mode: str = "ADAPTIVE", seed: int = 0) -> SimReport:
        return cls(
            mode=mode,
            seed=seed,
            latency_ms={k: _summary([]) for k in ["overall"] + [t.label for t in Tier]},
            max_wait_ms={t.label: 0.0 for t in Tier},
            rejected_by_tier={t.label: 0 for t in Tier},
        )

    def conserved(self) -> bool:
        return self.arrivals == self.served + self.rejected + self.in_queue_at_end

    def to_dict(self) -> dict:
        return {
            "mode": self.mode,
            "seed": self.seed,
            "arrivals": self.arrivals,
            "served": self.served,
            "rejected": self.rejected,
            "in_queue_at_end": self.in_queue_at_end,
            "failed": self.failed,
            "latency_ms": self.latency_ms,
            "max_wait_ms": self.max_wait_ms,
            "rejected_by_tier": self.rejected_by_tier,
            "mean_in_system": round(self.mean_in_system, 6),
            "peak_loaded_cost": self.peak_loaded_cost,
            "events": self.events,
            "utilization_timeline": self.utilization_timeline,
            "budget_timeline": self.budget_timeline,
            "decisions": self.decisions,
            "windows": self.windows,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    @classmethod
    def from_dict(cls, data: dict) -> SimReport:
        fields = {k: v for k, v in data.items() if k in cls.__dataclass_fields__ and k != "requests"}
        return cls(**fields)


WINDOW_COLUMNS = [
    "start_ms", "window_ms", "utilization", "served", "admitted", "rejected", "budget", "loaded_cost",
    "depth_primary", "depth_secondary", "depth_tertiary",
    "p95_primary_ms", "p95_secondary_ms", "p95_tertiary_ms",
]


def windows_csv(report: SimReport | dict) -> str:
    windows = report.windows if isinstance(report, SimReport) else report.get("windows", [])
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(WINDOW_COLUMNS)
    for w in windows:
        writer.writerow(
            [w["start_ms"], w["window_ms"], w["utilization"], w["served"], w["admitted"], w["rejected"],
             w.get("budget", ""), w.get("loaded_cost", "")]
            + [w["queue_depth"][t.label] for t in Tier]
            + [w["p95_latency_ms"][t.label] for t in Tier]
        )
    return buf.getvalue()


def run(cfg: SimConfig, catalog: ServiceCatalog | None = None, workload: Workload | None = None,
        mode: str | None = None) -> SimReport:
    cfg.validate()
    catalog = catalog or cfg.load_catalog()
    workload = workload if workload is not None else generate_workload(cfg, catalog)
    return Simulation(cfg, catalog, workload, mode).run()


# -- comparison --------------------------------------------------------


@dataclass
class ComparisonReport:
    baseline: SimReport
    candidate: SimReport
    offered_load: float

    def deltas(self) -> dict:
        b, c = self.baseline, self.candidate
        out = {
            "served": c.served - b.served,
            "rejected": c.rejected - b.rejected,
            "in_queue_at_end": c.in_queue_at_end - b.in_queue_at_end,
            "peak_loaded_cost": c.peak_loaded_cost - b.peak_loaded_cost,
        }
        for key in ["overall"] + [t.label for t in Tier]:
            for stat in ("mean", "p50", "p95"):
                out[f"{key}_{stat}_ms"] = round(c.latency_ms[key][stat] - b.latency_ms[key][stat], 3)
        return out

    def to_dict(self) -> dict:
        return {
            "offered_load": round(self.offered_load, 6),
            "baseline_mode": self.baseline.mode,
            "candidate_mode": self.candidate.mode,
            "baseline": self.baseline.to_dict(),
            "candidate": self.candidate.to_dict(),
            "deltas": self.deltas(),
            "checks": {
                "primary_p95_below_static_overall_p95": self.candidate.latency_ms["primary"]["p95"]
                < self.baseline.latency_ms["overall"]["p95"],
                "candidate_peak_cost": self.candidate.peak_loaded_cost,
                "baseline_peak_cost": self.baseline.peak_loaded_cost,
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"


def compare(cfg: SimConfig, modes: tuple[str, str] = ("STATIC", "ADAPTIVE")) -> ComparisonReport:
    cfg.validate()
    catalog = cfg.load_catalog()
    workload = generate_workload(cfg, catalog)
    base = run(cfg, catalog, workload, modes[0])
    cand = run(cfg, catalog, workload, modes[1])
    return ComparisonReport(base, cand, offered_load(cfg, catalog))


# -- traces --------------------------------------------------------------


def write_trace(path: str | Path, cfg: SimConfig, workload: Workload) -> None:
    """Versioned JSON lines: header, one line per arrival, trailing checksum."""
    lines = [json.dumps({"format": TRACE_FORMAT, "version": TRACE_VERSION, "config": cfg.to_dict()}, sort_keys=True)]
    for i in range(len(workload)):
        u = workload.users[int(workload.client[i])]
        lines.append(
            json.dumps(
                {
                    "t_us": int(workload.arrival_us[i]),
                    "client": int(workload.client[i]),
                    "user_id": u.user_id,
                    "age": u.age,
                    "occupation": u.occupation.name,
                    "service": workload.service[i],
                    "service_us": int(workload.service_us[i]),
                },
                sort_keys=True,
            )
        )
    body = "".join(line + "\n" for line in lines)
    digest = hashlib.sha256(body.encode("utf-8")).hexdigest()
    Path(path).write_text(body + json.dumps({"checksum": f"sha256:{digest}"}) + "\n", encoding="utf-8")


def read_trace(path: str | Path) -> tuple[SimConfig, Workload] | None:
    """Parse and verify a trace. Returns None for an empty file."""
    text = Path(path).read_text(encoding="utf-8")
    if not text.strip():
        return None
    lines = text.splitlines(keepends=True)
    try:
        tail = json.loads(lines[-1])
        header = json.loads(lines[0])
    except json.JSONDecodeError as exc:
        raise TraceChecksumError(f"unreadable trace: {exc}") from exc
    if not isinstance(tail, dict) or "checksum" not in tail or len(lines) < 2:
        raise TraceChecksumError("trace has no trailing checksum")
    body = "".join(lines[:-1])
    digest = "sha256:" + hashlib.sha256(body.encode("utf-8")).hexdigest()
    if digest != tail["checksum"]:
        raise TraceChecksumError("trace checksum mismatch")
    if header.get("format") != TRACE_FORMAT or header.get("version") != TRACE_VERSION:
        raise TraceVersionMismatch(f"unsupported trace version {header.get('version')!r}")
    cfg = SimConfig.from_dict(header["config"])
    users: dict[int, UserProfile] = {}
    arrival, client, services, service_us = [], [], [], []
    for line in lines[1:-1]:
        ev = json.loads(line)
        c = ev["client"]
        users.setdefault(c, UserProfile(ev["user_id"], ev["age"], Occupation[ev["occupation"]]))
        arrival.append(ev["t_us"])
        client.append(c)
        services.append(ev["service"])
        service_us.append(ev["service_us"])
    n_users = max(users, default=-1) + 1
    placeholder = UserProfile("unused", 18)
    wl = Workload(
        [users.get(i, placeholder) for i in range(n_users)],
        np.array(arrival, dtype=np.int64),
        np.array(client, dtype=np.int64),
        services,
        np.array(service_us, dtype=np.int64),
    )
    return cfg, wl


def record(cfg: SimConfig, trace_path: str | Path) -> SimReport:
    catalog = cfg.load_catalog()
    wl = generate_workload(cfg, catalog)
    write_trace(trace_path, cfg, wl)
    return run(cfg, catalog, wl)


def replay(trace_path: str | Path) -> SimReport:
    parsed = read_trace(trace_path)
    if parsed is None:
        return SimReport.empty()
    cfg, wl = parsed
    return run(cfg, workload=wl)
