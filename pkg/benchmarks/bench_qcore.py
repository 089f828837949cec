"""Time the compiled queue kernel against the pure-Python fallback.

    python3 benchmarks/bench_qcore.py [--sizes 10000 100000 300000] [--repeat 3]

Both backends run the same seeded three-tier workload at 1.2x capacity;
outputs are checked for equality before timings are reported.
"""

from __future__ import annotations

import argparse
import json
import time

import numpy as np

from adaptix.qcore import backends, simulate_queue


def workload(n: int, seed: int = 0, workers: int = 4, load: float = 1.2):
    rng = np.random.default_rng(seed)
    mean_service_us = 20_000
    rate_per_us = load * workers / mean_service_us
    arrival = np.cumsum(rng.exponential(1 / rate_per_us, n)).astype(np.int64)
    service = np.maximum(1, rng.exponential(mean_service_us, n)).astype(np.int64)
    rank = rng.choice(3, n, p=[0.3, 0.3, 0.4]).astype(np.int64)
    return arrival, service, rank, rank.copy(), np.array([64, 32, 16], dtype=np.int64)


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--sizes", type=int, nargs="+", default=[10_000, 100_000, 300_000])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--json", action="store_true", help="print results as JSON")
    args = ap.parse_args()

    available = backends()
    rows = []
    for n in args.sizes:
        arr, svc, rank, q, caps = workload(n)
        timings, outputs = {}, {}
        for name in available:
            best = float("inf")
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                run = simulate_queue(arr, svc, rank, q, caps, 4, 500_000, backend=name)
                best = min(best, time.perf_counter() - t0)
            timings[name] = best
            outputs[name] = run
        ref = outputs["python"]
        for name, run in outputs.items():
            assert np.array_equal(run.start_us, ref.start_us) and np.array_equal(run.finish_us, ref.finish_us), name
        row = {"n": n, "events": ref.events, **{f"{k}_s": round(v, 4) for k, v in timings.items()}}
        if "cython" in timings:
            row["speedup"] = round(timings["python"] / timings["cython"], 1)
        rows.append(row)

    if args.json:
        print(json.dumps(rows, indent=2))
        return
    print(f"{'requests':>10}{'events':>10}" + "".join(f"{k + ' s':>12}" for k in available) + f"{'speedup':>10}")
    for r in rows:
        print(f"{r['n']:>10}{r['events']:>10}" + "".join(f"{r[k + '_s']:>12.4f}" for k in available)
              + f"{r.get('speedup', ''):>10}")


if __name__ == "__main__":
    main()
