"""Serve mode: the gateway behind a small HTTP/1.1 JSON API.

Acceptor threads (one per connection) admit requests; a fixed pool of
worker threads pulls them off the gateway in priority order and runs the
banking handlers. Module loads complete on timer threads after their load
latency, exactly as the simulator schedules them on its virtual clock.
"""

from __future__ import annotations

import json
import logging
import secrets
import threading
import time
from concurrent.futures import Future
from dataclasses import dataclass, field
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path
from typing import Any

from .adapt import Adapter, AdaptPolicy
from .bankcore import Store, account_of, make_handlers, recover
from .catalog import ServiceCatalog, default_catalog
from .gateway import Gateway, QueueConfig, Request, Response
from .modlib import DEFAULT_LOAD_LATENCY_MS, registry_for
from .profiles import Occupation, UnderAge, UserProfile, classify

log = logging.getLogger(__name__)

OPENING_BALANCE_CENTS = 10_000_00


class BindError(OSError):
    pass


@dataclass
class ServeConfig:
    host: str = "127.0.0.1"
    port: int = 8080
    budget: int = 20
    queue: QueueConfig = field(default_factory=QueueConfig)
    policy: AdaptPolicy = field(default_factory=AdaptPolicy)
    adapt: bool = True
    window_ms: float = 1000.0
    load_latency_ms: float = DEFAULT_LOAD_LATENCY_MS
    journal_path: str | None = None
    request_timeout_s: float = 30.0

    @classmethod
    def from_bind(cls, bind: str, **kw) -> ServeConfig:
        host, _, port = bind.rpartition(":")
        if not port.isdigit():
            raise ValueError(f"bind address must look like HOST:PORT, got {bind!r}")
        return cls(host=host or "127.0.0.1", port=int(port), **kw)


class _HTTPServer(ThreadingHTTPServer):
    # handler threads are joined on close so no response is cut off
    daemon_threads = False
    block_on_close = True


class GatewayServer:
    """Owns the gateway, its worker pool and the HTTP listener."""

    def __init__(self, config: ServeConfig | None = None, catalog: ServiceCatalog | None = None):
        self.config = cfg = config or ServeConfig()
        self.catalog = catalog or default_catalog()
        self._t0 = time.monotonic_ns()
        if cfg.journal_path and Path(cfg.journal_path).exists():
            self.store = recover(cfg.journal_path)
            self.store.fsync = True
        else:
            self.store = Store(cfg.journal_path, fsync=cfg.journal_path is not None)
        self.store.clock = time.time
        self._timers: set[threading.Timer] = set()
        # loads requested before start() are timed from start()
        self._held_timers: list[threading.Timer] | None = []
        self.registry = registry_for(
            self.catalog,
            make_handlers(self.store),
            load_latency_ms=cfg.load_latency_ms,
            cost_limit=cfg.policy.max_budget,
            on_load_started=self._load_started,
        )
        self.gw = Gateway(self.catalog, self.registry, budget=cfg.budget, queue=cfg.queue, now_us=0)
        self.adapter = Adapter(self.gw, cfg.policy) if cfg.adapt else None
        self.sessions: dict[str, UserProfile] = {}
        self._futures: dict[int, Future] = {}
        self._ids = 0
        self._id_lock = threading.Lock()
        self._work = threading.Condition(self.gw.lock)
        self._stopping = threading.Event()
        self._accepting = True
        self._threads: list[threading.Thread] = []
        try:
            self.httpd = _HTTPServer((cfg.host, cfg.port), _make_handler(self))
        except OSError as exc:
            raise BindError(f"cannot bind {cfg.host}:{cfg.port}: {exc}") from exc

    @property
    def address(self) -> tuple[str, int]:
        return self.httpd.server_address[:2]

    def now_us(self) -> int:
        return (time.monotonic_ns() - self._t0) // 1000

    # -- module loading ------------------------------------------------

    def _load_started(self, mod) -> None:
        timer = threading.Timer(mod.load_latency_ms / 1000.0, self._load_done, args=(mod.id,))
        timer.daemon = True
        self._timers.add(timer)
        if self._held_timers is not None:
            self._held_timers.append(timer)
        else:
            timer.start()

    def _load_done(self, sid: str) -> None:
        with self._work:
            self._timers = {t for t in self._timers if t.is_alive() and t is not threading.current_thread()}
            self.registry.complete_load(sid)
            self.gw.load_finished(sid)
            self.gw.unpark()
            self._work.notify_all()

    # -- request path --------------------------------------------------

    def login(self, body: dict) -> dict:
        user = UserProfile(
            user_id=str(body["user_id"]),
            age=int(body["age"]),
            occupation=Occupation.parse(body.get("occupation", "OTHER")),
        )
        self.store.ensure_account(account_of(user.user_id), user.user_id, OPENING_BALANCE_CENTS)
        token = secrets.token_hex(16)
        self.sessions[token] = user
        seg = classify(user)
        plan = self.gw.plan_for(seg)
        return {"session": token, "segment": seg.label, "tiers": plan.to_dict()["tiers"]}

    def submit(self, user: UserProfile, service_id: str, payload: dict) -> Response:
        with self._id_lock:
            self._ids += 1
            rid = self._ids
        fut: Future = Future()
        with self._work:
            if not self._accepting:
                return Response(rid, "rejected", 0.0, reason="ShuttingDown")
            now = self.now_us()
            req = Request(rid, user, service_id, now, payload=payload)
            adm = self.gw.admit(req, now)
            if not adm:
                return Response(rid, "rejected", 0.0, reason=adm.reason.value, tier=adm.tier)
            self._futures[rid] = fut
            self._work.notify()
        return fut.result(timeout=self.config.request_timeout_s)

    def _worker(self) -> None:
        gw = self.gw
        while True:
            with self._work:
                while True:
                    if self._stopping.is_set() and gw.in_queue == 0:
                        return
                    if gw.active < gw.queue.workers:
                        req = gw.schedule_next(self.now_us())
                        if req is not None:
                            break
                    self._work.wait(0.05)
                    gw.unpark()
                ready = gw.begin_dispatch(req, self.now_us()).value == "ready"
            if not ready:
                continue
            outcome, value = gw.execute(req)
            with self._work:
                resp = gw.finish(req, self.now_us(), outcome, value)
                fut = self._futures.pop(req.request_id)
                self._work.notify_all()
            fut.set_result(resp)

    def _adapt_loop(self) -> None:
        period = self.config.window_ms / 1000.0
        while not self._stopping.wait(period):
            with self._work:
                _, decision, _ = self.adapter.tick(self.now_us())
                self._work.notify_all()

    def metrics(self) -> dict:
        window = self.gw.observe(self.now_us()).to_dict()
        window["totals"] = self.gw.totals()
        return window

    def set_budget(self, budget: int) -> dict:
        with self._work:
            report = self.gw.set_budget(budget)
            self._work.notify_all()
        return {"budget": self.gw.budget, "report": report.to_dict()}

    # -- lifecycle -----------------------------------------------------

    def start(self) -> GatewayServer:
        held, self._held_timers = self._held_timers or [], None
        for timer in held:
            timer.start()
        for i in range(self.gw.queue.workers):
            self._spawn(self._worker, f"adaptix-worker-{i}")
        if self.adapter is not None:
            self._spawn(self._adapt_loop, "adaptix-adapt")
        self._spawn(self.httpd.serve_forever, "adaptix-http")
        log.info("serving on %s:%d", *self.address)
        return self

    def _spawn(self, fn, name: str) -> None:
        t = threading.Thread(target=fn, name=name, daemon=True)
        t.start()
        self._threads.append(t)

    def shutdown(self, timeout: float = 10.0) -> dict:
        """Stop accepting, drain every admitted request, then stop.

        Returns the final totals; ``lost`` counts admitted requests that were
        not served, which is zero after a clean drain.
        """
        with self._work:
            self._accepting = False
        self.httpd.shutdown()
        with self._work:
            self._stopping.set()
            self._work.notify_all()
        deadline = time.monotonic() + timeout
        for t in self._threads:
            t.join(max(0.0, deadline - time.monotonic()))
        self.httpd.server_close()
        self.store.close()
        totals = self.gw.totals()
        totals["lost"] = totals["admitted"] - totals["served"]
        return totals

    def serve_forever(self) -> None:
        self.start()
        try:
            while True:
                time.sleep(3600)
        except KeyboardInterrupt:
            pass
        finally:
            log.info("shutdown: %s", json.dumps(self.shutdown()))


def _make_handler(server: GatewayServer):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s - " + fmt, self.address_string(), *args)

        def _send(self, status: int, body: Any) -> None:
            data = json.dumps(body).encode()
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _body(self) -> dict:
            n = int(self.headers.get("Content-Length") or 0)
            if n == 0:
                return {}
            data = json.loads(self.rfile.read(n))
            if not isinstance(data, dict):
                raise ValueError("body must be a JSON object")
            return data

        def do_GET(self):
            if self.path == "/health":
                self._send(200, {"status": "ok"})
            elif self.path == "/metrics":
                self._send(200, server.metrics())
            elif self.path == "/admin/modules":
                self._send(200, server.registry.snapshot())
            else:
                self._send(404, {"error": "NotFound", "path": self.path})

        def do_POST(self):
            try:
                body = self._body()
            except ValueError as exc:
                self._send(400, {"error": "BadRequest", "detail": str(exc)})
                return
            try:
                if self.path == "/login":
                    self._send(200, server.login(body))
                elif self.path.startswith("/svc/"):
                    self._service(self.path[len("/svc/"):], body)
                elif self.path == "/admin/threshold":
                    budget = body.get("budget")
                    if not isinstance(budget, int) or isinstance(budget, bool) or budget < 0:
                        self._send(400, {"error": "BadRequest", "detail": "budget must be a non-negative integer"})
                    else:
                        self._send(200, server.set_budget(budget))
                else:
                    self._send(404, {"error": "NotFound", "path": self.path})
            except (KeyError, ValueError, UnderAge) as exc:
                self._send(400, {"error": "BadRequest", "detail": str(exc)})

        def _service(self, service_id: str, body: dict) -> None:
            user = server.sessions.get(body.pop("session", None) or "")
            if user is None:
                self._send(401, {"error": "Unauthorized", "detail": "login first and pass the session token"})
                return
            resp = server.submit(user, service_id, body)
            status = 200 if resp.outcome == "ok" else (503 if resp.outcome == "rejected" else 500)
            if resp.reason == "UnknownService":
                status = 404
            self._send(status, resp.to_dict())

    return Handler


def serve(bind: str, **kw) -> None:
    GatewayServer(ServeConfig.from_bind(bind, **kw)).serve_forever()
