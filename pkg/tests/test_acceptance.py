"""Acceptance criteria 1-10.

Each test records one PASS/FAIL line (shown in the terminal summary and
printed when this file is run directly) and then asserts the criterion.
"""

from __future__ import annotations

import json
import random
import threading
import time
import urllib.error
import urllib.request
from importlib import resources

import numpy as np
import pytest

from adaptix.adapt import AdaptPolicy, DecisionKind, decide
from adaptix.bankcore import BankError, Store, account_of, make_handlers
from adaptix.catalog import default_catalog
from adaptix.cli import main as cli_main
from adaptix.gateway import Gateway, QueueConfig, Request
from adaptix.modlib import apply_plan, registry_for, validate_history
from adaptix.profiles import Segment, UserProfile
from adaptix.qcore import BACKEND, simulate_queue
from adaptix.server import GatewayServer, ServeConfig
from adaptix.sim import SimConfig, compare, load_scenario, record, replay, run
from adaptix.tiering import Tier, assign_tiers

from conftest import ACCEPTANCE_LINES
from modelcheck import ERROR, OPS, apply, bfs, check_invariants, new_registry, observe, oracle

pytestmark = pytest.mark.acceptance


def report(n: int, ok: bool, detail: str, elapsed: float | None = None) -> None:
    timing = f" ({elapsed:.2f}s)" if elapsed is not None else ""
    line = f"[criterion {n:>2}] {'PASS' if ok else 'FAIL'} {detail}{timing}"
    ACCEPTANCE_LINES[n] = line
    print(line)


def scenario(name: str) -> str:
    return str(resources.files("adaptix").joinpath(f"data/scenarios/{name}.json"))


# 1 ---------------------------------------------------------------------------

FIXTURES = {
    15: ({"fund_transfer"}, {"third_party_transfer", "railway_ticket"}),
    20: ({"fund_transfer", "transaction_history"}, {"railway_ticket", "third_party_transfer"}),
}


def test_c1_fixture_conformance(capsys):
    t0 = time.perf_counter()
    ids = set(default_catalog().ids)
    problems = []
    for threshold, (primary, secondary) in FIXTURES.items():
        code = cli_main(["tiers", "18-25", str(threshold), "--format", "json"])
        tiers = json.loads(capsys.readouterr().out)["tiers"]
        got = (set(tiers["primary"]), set(tiers["secondary"]), set(tiers["tertiary"]))
        if code != 0 or got != (primary, secondary, ids - primary - secondary):
            problems.append(f"T={threshold}: {tiers}")
    elapsed = time.perf_counter() - t0
    ok = not problems and elapsed < 1.0
    report(1, ok, "tiers 18-25 15/20 match both layouts exactly" if not problems else "; ".join(problems), elapsed)
    assert ok


# 2 ---------------------------------------------------------------------------


def test_c2_tiering_monotonicity():
    t0 = time.perf_counter()
    cat = default_catalog()
    violations = []
    for seg in Segment:
        plans = [assign_tiers(cat, seg, b) for b in range(41)]
        for b in range(1, 41):
            lo, hi = plans[b - 1], plans[b]
            if not lo.primary <= hi.primary or not (lo.primary | lo.secondary) <= (hi.primary | hi.secondary):
                violations.append((seg.label, b))
    elapsed = time.perf_counter() - t0
    ok = not violations and elapsed < 1.0
    report(2, ok, f"budgets 0..40 x 4 segments, {len(violations)} violations", elapsed)
    assert ok


# 3 ---------------------------------------------------------------------------


def _random_ops(seed: int, n_ops: int) -> int:
    cat = default_catalog()
    rng = random.Random(seed)
    plans = [assign_tiers(cat, seg, b) for seg in Segment for b in range(0, 41, 5)]
    reg = registry_for(cat, cost_limit=rng.choice([None, 30, 15]))
    pending: list[str] = []
    reg.on_load_started = lambda m: pending.append(m.id)
    for _ in range(n_ops):
        x = rng.random()
        mid = rng.choice(cat.ids)
        if x < 0.2:
            apply(reg, mid, "load")
        elif x < 0.35:
            if pending:
                apply(reg, pending.pop(rng.randrange(len(pending))), "complete")
        elif x < 0.5:
            apply(reg, mid, "drain")
        elif x < 0.7:
            apply(reg, mid, "begin")
        elif x < 0.85:
            apply(reg, mid, "end")
        else:
            apply_plan(reg, rng.choice(plans))
        check_invariants(reg)
    validate_history(reg.history)
    return len(reg.history)


def test_c3_module_state_machine_safety():
    t0 = time.perf_counter()
    transitions = sum(_random_ops(seed, 10_000) for seed in (1, 2, 3))

    start = ("UNLOADED", 0, False)
    reachable = bfs(10, oracle, start)
    mismatches = 0
    for state, path in reachable.items():
        for op in OPS:
            reg = new_registry()
            for step in path:
                apply(reg, "m", step)
            accepted = apply(reg, "m", op)
            expected = oracle(state, op)
            if accepted != (expected != ERROR) or (accepted and observe(reg) != expected):
                mismatches += 1
            check_invariants(reg)
    elapsed = time.perf_counter() - t0
    ok = mismatches == 0 and elapsed < 10.0
    report(3, ok, f"3x10^4 random ops ({transitions} transitions) legal; depth-10 model check "
                  f"{len(reachable)} states x {len(OPS)} ops, {mismatches} mismatches", elapsed)
    assert ok


# 4 ---------------------------------------------------------------------------


def _oracle_pick(queued, now, aging_us):
    return min(queued, key=lambda r: (int(r.tier) - max(0, now - r.arrival_us) // aging_us,
                                      r.arrival_us, r.request_id))


def test_c4_scheduler_and_starvation():
    t0 = time.perf_counter()
    cat = default_catalog()
    rng = random.Random(4)
    users = [UserProfile(f"u{a}", a) for a in (20, 30, 40, 60)]
    disagreements = 0
    for trial in range(1000):
        reg = registry_for(cat)
        gw = Gateway(cat, reg, budget=rng.choice([0, 10, 15, 20, 30]),
                     queue=QueueConfig({t: None for t in Tier}, aging_limit_ms=rng.choice([1, 20, 500])))
        now = rng.randint(0, 3_000_000)
        queued = []
        for i in range(rng.randint(1, 15)):
            r = Request(trial * 100 + (i * 37) % 100, rng.choice(users), rng.choice(cat.ids), rng.randint(0, now))
            gw.admit(r)
            queued.append(r)
        if gw.schedule_next(now) is not _oracle_pick(queued, now, gw.queue.aging_limit_us):
            disagreements += 1

    # starvation: overloaded three-tier run through the compiled kernel
    qc = QueueConfig()
    n, workers, aging = 600_000, qc.workers, qc.aging_limit_us
    g = np.random.default_rng(42)
    mean_service = 20_000
    arrival = np.cumsum(g.exponential(mean_service / (1.3 * workers), n)).astype(np.int64)
    service = (g.exponential(mean_service, n) + 1).astype(np.int64)
    tier = g.choice(3, n, p=[0.3, 0.3, 0.4]).astype(np.int64)
    caps = np.array([qc.capacity_per_tier[t] for t in Tier], dtype=np.int64)
    res = simulate_queue(arrival, service, tier, tier, caps, workers, aging)
    admitted = ~res.rejected
    all_served = bool(np.all(res.finish_us[admitted] >= 0))
    wait = res.start_us - arrival
    bound_factor = qc.total_capacity
    worst = {}
    within = True
    for t in Tier:
        sel = admitted & (tier == int(t))
        worst[t.label] = int(wait[sel].max()) / 1000.0
        bound = (int(t) + 1) * aging * bound_factor / 1000.0
        within &= worst[t.label] <= bound
    elapsed = time.perf_counter() - t0
    ok = disagreements == 0 and res.events >= 1_000_000 and all_served and within and elapsed < 30.0
    report(4, ok, f"oracle agreement 1000/1000={disagreements == 0}; {res.events} events ({BACKEND} kernel), "
                  f"all admitted served={all_served}, max wait ms {worst} within (rank+1)*aging*{bound_factor}",
           elapsed)
    assert ok


# 5 ---------------------------------------------------------------------------


def test_c5_conservation():
    t0 = time.perf_counter()
    reports = []
    for seed in (1, 2, 3):
        for rate in (0.0, 0.5, 3.0):
            cfg = SimConfig(seed=seed, n_clients=80, arrival_rate_per_client=rate, duration_ms=6000.0)
            c = compare(cfg)
            reports += [c.baseline, c.candidate]
    reports.append(run(load_scenario(scenario("overload"))))
    sims_ok = all(r.conserved() for r in reports)

    rng = random.Random(5)
    store = Store()
    handlers = make_handlers(store)
    users = [UserProfile(f"c{i}", 20 + 10 * i) for i in range(6)]
    for u in users:
        store.open_account(account_of(u.user_id), u.user_id, rng.randint(0, 50_000_00))
    total = store.total_balance()
    bank_ok, ops = True, 0
    for _ in range(2000):
        u = rng.choice(users)
        sid = rng.choice(list(handlers))
        payload = {"to_user": rng.choice(users).user_id, "amount_cents": rng.randint(1, 5_000_00)}
        try:
            handlers[sid](type("R", (), {"user": u, "payload": payload})())
        except (BankError, ValueError, KeyError):
            pass  # refused operations must leave balances alone, checked below
        ops += 1
        bank_ok &= store.total_balance() == total and min(store.balances().values()) >= 0
    elapsed = time.perf_counter() - t0
    ok = sims_ok and bank_ok
    report(5, ok, f"{len(reports)} reports conserve={sims_ok}; bank total constant over {ops} ops={bank_ok}", elapsed)
    assert ok


# 6 ---------------------------------------------------------------------------


def test_c6_mm1_sanity():
    t0 = time.perf_counter()
    cfg = load_scenario(scenario("mm1"))
    rep = run(cfg)
    elapsed = time.perf_counter() - t0
    err = abs(rep.mean_in_system - 1.0)
    ok = err <= 0.1 and rep.arrivals >= 95_000 and elapsed < 30.0
    report(6, ok, f"M/M/1 rho=0.5, {rep.arrivals} arrivals: mean in system {rep.mean_in_system:.4f} "
                  f"(target 1.0 +/- 10%)", elapsed)
    assert ok


# 7 ---------------------------------------------------------------------------


def test_c7_load_reduction_direction():
    t0 = time.perf_counter()
    cfg = load_scenario(scenario("overload"))
    c = compare(cfg)
    static, adaptive = c.baseline, c.candidate
    total = default_catalog().total_cost
    a = adaptive.latency_ms["primary"]["p95"] < static.latency_ms["overall"]["p95"]
    b = adaptive.peak_loaded_cost <= cfg.policy.max_budget < static.peak_loaded_cost == total
    elapsed = time.perf_counter() - t0
    ok = a and b and elapsed < 60.0
    report(7, ok, f"offered load {c.offered_load:.3f}, seed {cfg.seed}: ADAPTIVE primary p95 "
                  f"{adaptive.latency_ms['primary']['p95']:.1f}ms vs STATIC overall p95 "
                  f"{static.latency_ms['overall']['p95']:.1f}ms; peak cost {adaptive.peak_loaded_cost} "
                  f"<= {cfg.policy.max_budget} < {static.peak_loaded_cost} = {total}", elapsed)
    assert ok


# 8 ---------------------------------------------------------------------------


def test_c8_determinism(tmp_path, capsys):
    t0 = time.perf_counter()
    outs = []
    for d in ("a", "b"):
        code = cli_main(["simulate", scenario("overload"), "--output-dir", str(tmp_path / d)])
        capsys.readouterr()
        outs.append((code, (tmp_path / d / "run.json").read_bytes()))
    same_sim = outs[0][0] == outs[1][0] == 0 and outs[0][1] == outs[1][1]
    trace = tmp_path / "trace.jsonl"
    original = record(load_scenario(scenario("overload")), trace)
    same_replay = replay(trace).to_json() == original.to_json()
    elapsed = time.perf_counter() - t0
    ok = same_sim and same_replay
    report(8, ok, f"simulate twice byte-identical={same_sim}; replay matches original={same_replay}", elapsed)
    assert ok


# 9 ---------------------------------------------------------------------------


def _reference_decisions(trace, policy, budget):
    out = []
    k = policy.consecutive_windows
    for i in range(len(trace)):
        recent = trace[max(0, i - k + 1): i + 1]
        kind, new = "Hold", budget
        if len(recent) == k and all(u > policy.high_watermark for u in recent):
            new = max(policy.min_budget, budget - policy.step)
            kind = "LowerThreshold" if new != budget else "Hold"
        elif len(recent) == k and all(u < policy.low_watermark for u in recent):
            new = min(policy.max_budget, budget + policy.step)
            kind = "RaiseThreshold" if new != budget else "Hold"
        out.append(kind)
        budget = new
    return out


def _policy_decisions(trace, policy, budget):
    out = []
    for i in range(len(trace)):
        d = decide(trace[: i + 1], policy, budget)
        out.append(d.kind.value)
        if d.kind is not DecisionKind.HOLD:
            budget = d.new_budget
    return out


def _traces(rng):
    traces = {}
    for period in (2, 3, 4, 6, 8, 12):
        traces[f"oscillating/{period}"] = ([0.95] * period + [0.2] * period) * 6, False
    traces["oscillating/noisy"] = [0.9 + 0.05 * rng.random() if (i // 5) % 2 else 0.3 * rng.random()
                                   for i in range(80)], False
    traces["ramp/up"] = [i / 59 for i in range(60)], True
    traces["ramp/down"] = [1 - i / 59 for i in range(60)], True
    traces["ramp/up-down"] = [i / 39 for i in range(40)] + [1 - i / 39 for i in range(40)], False
    for at in (5, 17, 30):
        traces[f"step/up@{at}"] = [0.2] * at + [0.95] * (60 - at), True
        traces[f"step/down@{at}"] = [0.95] * at + [0.2] * (60 - at), True
    traces["step/into-band"] = [0.95] * 10 + [0.65] * 50, True
    return traces


def test_c9_adaptation_hysteresis():
    t0 = time.perf_counter()
    policy = AdaptPolicy()
    mismatched, flapping = [], []
    for name, (trace, single_crossing) in _traces(random.Random(9)).items():
        for budget in (5, 15, 30):
            got = _policy_decisions(trace, policy, budget)
            if got != _reference_decisions(trace, policy, budget):
                mismatched.append(name)
            moves = [k for k in got]
            for x, y in zip(moves, moves[1:]):
                if {x, y} == {"LowerThreshold", "RaiseThreshold"} and single_crossing:
                    flapping.append(name)
    elapsed = time.perf_counter() - t0
    ok = not mismatched and not flapping
    report(9, ok, f"{len(_traces(random.Random(9)))} traces x 3 budgets: oracle mismatches {sorted(set(mismatched))}, "
                  f"consecutive Lower/Raise on single-crossing traces {sorted(set(flapping))}", elapsed)
    assert ok


# 10 --------------------------------------------------------------------------


def _call(base, method, path, body=None):
    data = None if body is None else json.dumps(body).encode()
    req = urllib.request.Request(base + path, data=data, method=method, headers={"Content-Type": "application/json"})
    try:
        with urllib.request.urlopen(req, timeout=10) as resp:
            return resp.status, json.loads(resp.read())
    except urllib.error.HTTPError as err:
        return err.code, json.loads(err.read())
    except urllib.error.URLError:
        return None, {"error": "refused"}


def test_c10_serve_smoke(tmp_path):
    t0 = time.perf_counter()
    server = GatewayServer(ServeConfig(port=0, journal_path=str(tmp_path / "journal.jsonl"))).start()
    host, port = server.address
    base = f"http://{host}:{port}"
    checks = {}
    try:
        checks["health"] = _call(base, "GET", "/health") == (200, {"status": "ok"})
        _, login = _call(base, "POST", "/login", {"user_id": "u22", "age": 22, "occupation": "STUDENT"})
        _call(base, "POST", "/login", {"user_id": "payee", "age": 40})
        checks["segment"] = login["segment"] == "18-25"
        session = login["session"]
        tertiary = "online_dd"
        checks["plan"] = "fund_transfer" in login["tiers"]["primary"] and tertiary in login["tiers"]["tertiary"]

        s1, r1 = _call(base, "POST", "/svc/fund_transfer",
                       {"session": session, "to_user": "payee", "amount_cents": 1500})
        s2, r2 = _call(base, "POST", f"/svc/{tertiary}", {"session": session})
        checks["primary served"] = s1 == 200 and r1["tier"] == "primary"
        checks["tertiary served"] = s2 == 200 and r2["tier"] == "tertiary"

        _, metrics = _call(base, "GET", "/metrics")
        by_tier = metrics["totals"]["served_by_tier"]
        checks["metrics"] = by_tier["primary"] >= 1 and by_tier["tertiary"] >= 1
        _, modules = _call(base, "GET", "/admin/modules")
        mods = {m["id"]: m for m in modules}
        checks["modules"] = (
            mods["fund_transfer"]["state"] == "LOADED"
            and mods[tertiary]["tier"] == "tertiary"
            and mods[tertiary]["state"] in ("UNLOADED", "DRAINING")
            and all(set(m) >= {"id", "state", "in_flight"} for m in modules)
        )

        results = []
        threads = [
            threading.Thread(target=lambda s=sid: results.append(_call(base, "POST", f"/svc/{s}", {"session": session})))
            for sid in ["balance_inquiry", tertiary, "mobile_recharge", "transaction_history"] * 6
        ]
        for t in threads:
            t.start()
        time.sleep(0.02)
    finally:
        totals = server.shutdown()
    for t in threads:
        t.join()
    # connections opened after shutdown began are refused or rejected; none may fail
    checks["drain"] = totals["lost"] == 0 and all(
        status == 200 or (status == 503 and body.get("reason") == "ShuttingDown") or status is None
        for status, body in results
    )
    elapsed = time.perf_counter() - t0
    ok = all(checks.values()) and elapsed < 10.0
    failed = [k for k, v in checks.items() if not v]
    report(10, ok, f"login/primary/tertiary/metrics/modules checks ok, shutdown lost {totals['lost']} of "
                   f"{totals['admitted']} admitted" + (f"; failed: {failed}" if failed else ""), elapsed)
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q", "-p", "no:cacheprovider"]))
