"""Command-line entry point.

Exit codes: 0 success, 1 usage error, 2 validation error, 3 runtime failure.
With ``--format json`` stdout always carries one JSON document, errors
included; human-readable messages go to stderr.
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path

from . import __version__
from .adapt import InvalidPolicy
from .catalog import CatalogError, load_catalog
from .profiles import InvalidDistribution, Segment, UnderAge
from .sim import (
    InvalidConfig,
    SimReport,
    TraceChecksumError,
    TraceVersionMismatch,
    compare,
    generate_workload,
    load_scenario,
    replay,
    run,
    windows_csv,
    write_trace,
)
from .tiering import PRIMARY_FRACTION, UnknownSegment, assign_tiers, plan_table

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_RUNTIME = 0, 1, 2, 3
FORMATS = ("table", "json", "csv")

VALIDATION_ERRORS = (
    InvalidConfig,
    InvalidPolicy,
    InvalidDistribution,
    CatalogError,
    UnknownSegment,
    UnderAge,
    TraceVersionMismatch,
    TraceChecksumError,
)

log = logging.getLogger("adaptix")


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(message)


@dataclass
class RunConfig:
    catalog_path: str | None = None
    scenario_path: str | None = None
    output_dir: str | None = None
    format: str = "table"
    log_level: str = "WARNING"

    def __post_init__(self):
        if self.format not in FORMATS:
            raise UsageError(f"format must be one of {', '.join(FORMATS)}")

    def ensure_output_dir(self) -> Path | None:
        if self.output_dir is None:
            return None
        path = Path(self.output_dir)
        path.mkdir(parents=True, exist_ok=True)
        return path


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="adaptix", description="Demographic tiering gateway: plans, simulation and serving.")
    p.add_argument("--version", action="version", version=f"adaptix {__version__}")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(sp, formats=FORMATS, default="table"):
        sp.add_argument("--format", choices=formats, default=default)
        sp.add_argument("--log-level", default=None, help="overrides ADAPTIX_LOG")

    t = sub.add_parser("tiers", help="show the tier plan for a segment and budget")
    t.add_argument("segment_pos", nargs="?", metavar="SEGMENT")
    t.add_argument("threshold_pos", nargs="?", type=int, metavar="THRESHOLD")
    t.add_argument("--segment")
    t.add_argument("--threshold", type=int)
    t.add_argument("--catalog", help="catalog JSON (defaults to the bundled one)")
    t.add_argument("--primary-fraction", type=float, default=PRIMARY_FRACTION)
    common(t, ("table", "json"))

    s = sub.add_parser("simulate", help="run one scenario on the virtual clock")
    s.add_argument("scenario")
    s.add_argument("--mode", choices=("ADAPTIVE", "STATIC"))
    s.add_argument("--seed", type=int)
    s.add_argument("--output-dir", help="write run.json and windows.csv here")
    s.add_argument("--trace", help="also save the workload trace for replay")
    common(s, default="json")

    c = sub.add_parser("compare", help="run STATIC and ADAPTIVE on the same workload")
    c.add_argument("scenario")
    c.add_argument("--seed", type=int)
    c.add_argument("--output-dir", help="write comparison.json here")
    common(c, ("table", "json"), default="json")

    v = sub.add_parser("serve", help="run the HTTP gateway")
    v.add_argument("--bind", default="127.0.0.1:8080", help="HOST:PORT")
    v.add_argument("--budget", type=int, default=20)
    v.add_argument("--no-adapt", action="store_true", help="keep the budget fixed")
    v.add_argument("--journal", help="journal file for the demo bank (recovered if present)")
    v.add_argument("--load-latency-ms", type=float, default=50.0)
    v.add_argument("--log-level", default=None)

    r = sub.add_parser("report", help="render a saved run.json")
    r.add_argument("run_json")
    common(r)

    y = sub.add_parser("replay", help="re-run a saved workload trace")
    y.add_argument("trace")
    y.add_argument("--output-dir")
    common(y, default="json")
    return p


# -- rendering -------------------------------------------------------------


def _report_table(rep: dict) -> str:
    lines = [
        f"mode {rep['mode']}  seed {rep['seed']}",
        f"arrivals {rep['arrivals']}  served {rep['served']}  rejected {rep['rejected']}"
        f"  in_queue_at_end {rep['in_queue_at_end']}",
        f"peak_loaded_cost {rep['peak_loaded_cost']}  mean_in_system {rep['mean_in_system']}",
        f"{'latency':<10}{'count':>8}{'mean':>10}{'p50':>10}{'p95':>10}",
    ]
    for key, s in rep["latency_ms"].items():
        lines.append(f"{key:<10}{s['count']:>8}{s['mean']:>10.1f}{s['p50']:>10.1f}{s['p95']:>10.1f}")
    return "\n".join(lines)


def _comparison_table(cmp: dict) -> str:
    b, c = cmp["baseline"], cmp["candidate"]
    rows = [
        ("offered_load", cmp["offered_load"], ""),
        ("mode", b["mode"], c["mode"]),
        ("served", b["served"], c["served"]),
        ("rejected", b["rejected"], c["rejected"]),
        ("overall p95 ms", b["latency_ms"]["overall"]["p95"], c["latency_ms"]["overall"]["p95"]),
        ("primary p95 ms", b["latency_ms"]["primary"]["p95"], c["latency_ms"]["primary"]["p95"]),
        ("peak_loaded_cost", b["peak_loaded_cost"], c["peak_loaded_cost"]),
    ]
    return "\n".join(f"{k:<18}{str(x):>12}{str(y):>12}" for k, x, y in rows)


def _emit(args, payload, table: str | None = None, csv_text: str | None = None) -> None:
    if args.format == "json":
        sys.stdout.write(json.dumps(payload, indent=2) + "\n")
    elif args.format == "csv":
        sys.stdout.write(csv_text if csv_text is not None else "")
    else:
        sys.stdout.write((table or "") + "\n")


# -- subcommands -----------------------------------------------------------


def cmd_tiers(args) -> int:
    seg_text = args.segment or args.segment_pos
    threshold = args.threshold if args.threshold is not None else args.threshold_pos
    if seg_text is None or threshold is None:
        raise UsageError("tiers needs a segment and a threshold")
    if threshold < 0:
        raise UsageError("threshold must be >= 0")
    try:
        segment = Segment.parse(seg_text)
    except (KeyError, ValueError) as exc:
        raise UnknownSegment(seg_text) from exc
    catalog = load_catalog(args.catalog)
    plan = assign_tiers(catalog, segment, threshold, args.primary_fraction)
    _emit(args, plan.to_dict(), plan_table(plan, catalog))
    return EXIT_OK


def _apply_overrides(cfg, args):
    if getattr(args, "seed", None) is not None:
        cfg.seed = args.seed
    if getattr(args, "mode", None):
        cfg.mode = args.mode
    return cfg


def cmd_simulate(args) -> int:
    rc = RunConfig(scenario_path=args.scenario, output_dir=args.output_dir, format=args.format)
    cfg = _apply_overrides(load_scenario(rc.scenario_path), args)
    catalog = cfg.load_catalog()
    wl = generate_workload(cfg, catalog)
    if args.trace:
        write_trace(args.trace, cfg, wl)
    rep = run(cfg, catalog, wl)
    _write_run(rc, rep)
    _emit(args, rep.to_dict(), _report_table(rep.to_dict()), windows_csv(rep))
    return EXIT_OK


def _write_run(rc: RunConfig, rep: SimReport) -> None:
    out = rc.ensure_output_dir()
    if out is not None:
        (out / "run.json").write_text(rep.to_json(), encoding="utf-8")
        (out / "windows.csv").write_text(windows_csv(rep), encoding="utf-8")


def cmd_compare(args) -> int:
    rc = RunConfig(scenario_path=args.scenario, output_dir=args.output_dir, format=args.format)
    cfg = _apply_overrides(load_scenario(rc.scenario_path), args)
    result = compare(cfg)
    out = rc.ensure_output_dir()
    if out is not None:
        (out / "comparison.json").write_text(result.to_json(), encoding="utf-8")
    data = result.to_dict()
    _emit(args, data, _comparison_table(data))
    return EXIT_OK


def cmd_report(args) -> int:
    path = Path(args.run_json)
    if not path.is_file():
        raise InvalidConfig(f"report file not found: {path}")
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
        if not isinstance(data, dict) or not {"mode", "seed", "latency_ms"} <= set(data):
            raise TypeError("missing mode, seed or latency_ms")
        rep = SimReport.from_dict(data)
    except (json.JSONDecodeError, TypeError) as exc:
        raise InvalidConfig(f"{path}: not a run report ({exc})") from exc
    _emit(args, rep.to_dict(), _report_table(rep.to_dict()), windows_csv(rep))
    return EXIT_OK


def cmd_replay(args) -> int:
    path = Path(args.trace)
    if not path.is_file():
        raise InvalidConfig(f"trace file not found: {path}")
    rep = replay(path)
    _write_run(RunConfig(output_dir=args.output_dir, format=args.format), rep)
    _emit(args, rep.to_dict(), _report_table(rep.to_dict()), windows_csv(rep))
    return EXIT_OK


def cmd_serve(args) -> int:
    from .server import GatewayServer, ServeConfig

    cfg = ServeConfig.from_bind(
        args.bind,
        budget=args.budget,
        adapt=not args.no_adapt,
        journal_path=args.journal,
        load_latency_ms=args.load_latency_ms,
    )
    server = GatewayServer(cfg)
    print(f"serving on http://{server.address[0]}:{server.address[1]}", file=sys.stderr)
    server.serve_forever()
    return EXIT_OK


COMMANDS = {
    "tiers": cmd_tiers,
    "simulate": cmd_simulate,
    "compare": cmd_compare,
    "serve": cmd_serve,
    "report": cmd_report,
    "replay": cmd_replay,
}


def _setup_logging(level: str | None) -> None:
    level = (level or os.environ.get("ADAPTIX_LOG") or "WARNING").upper()
    logging.basicConfig(level=getattr(logging, level, logging.WARNING), stream=sys.stderr,
                        format="%(asctime)s %(levelname)s %(name)s %(message)s")


def _fail(want_json: bool, code: int, kind: str, message: str) -> int:
    print(f"adaptix: {message}", file=sys.stderr)
    if want_json:
        sys.stdout.write(json.dumps({"error": kind, "message": message, "exit_code": code}) + "\n")
    return code


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    want_json = "--format=json" in argv or any(
        a == "--format" and b == "json" for a, b in zip(argv, argv[1:])
    )
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except UsageError as exc:
        return _fail(want_json, EXIT_USAGE, "UsageError", str(exc))
    except SystemExit as exc:  # --help and --version
        return int(exc.code or 0)
    want_json = getattr(args, "format", None) == "json"
    _setup_logging(getattr(args, "log_level", None))
    try:
        return COMMANDS[args.command](args)
    except UsageError as exc:
        return _fail(want_json, EXIT_USAGE, "UsageError", str(exc))
    except VALIDATION_ERRORS as exc:
        return _fail(want_json, EXIT_VALIDATION, type(exc).__name__, str(exc))
    except (ValueError, KeyError) as exc:
        return _fail(want_json, EXIT_VALIDATION, type(exc).__name__, str(exc))
    except Exception as exc:  # anything else is a runtime failure
        log.debug("runtime failure", exc_info=True)
        return _fail(want_json, EXIT_RUNTIME, type(exc).__name__, str(exc))


if __name__ == "__main__":
    sys.exit(main())
