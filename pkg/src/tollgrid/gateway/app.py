"""HTTP gateway: single entry point over the broker for dashboards and tools.

One consumer thread subscribes to `route`, `segment`, `toll`,
`registry.announce`, and `sim.config`, folds them into per-vehicle views and
the hosted service registry, and fans every event out to connected
`GET /events` stream clients as newline-delimited JSON. If the broker drops,
the gateway keeps serving the last known state flagged as stale and
reconnects with the standard retry policy.

Endpoints: GET /vehicles, /vehicles/{id}, /tolls, /registry, /zones,
/healthz, /events; POST /sim/config.
"""

from __future__ import annotations

import json
import logging
import queue
import threading
import time
from collections import deque
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from tollgrid.framekit import Registry, RetryPolicy, SystemClock
from tollgrid.geo.zonegen import zones_to_records
from tollgrid.msgbus import BusError
from tollgrid.services import (
    MessageError,
    RouteMsg,
    TollMsg,
    decode_json,
    eur_str,
    polyline_to_json,
)
from tollgrid.services.runner import REGISTRY_TOPIC, connect_with_retry
from tollgrid.simulator import SIM_CONFIG_TOPIC, SimConfig, SimConfigError

logger = logging.getLogger(__name__)

DEFAULT_ROUTE_HISTORY = 100
DEFAULT_EVENT_QUEUE_CAP = 1_000
MAX_BODY_BYTES = 64 * 1024
TOPICS = ("route", "segment", "toll", REGISTRY_TOPIC, SIM_CONFIG_TOPIC)


def eur_2dp(micro: int) -> str:
    """Micro-euros rendered with exactly two decimals (half-up at the cent)."""
    cents = (micro + 5_000) // 10_000
    return "%d.%02d" % divmod(cents, 100)


class _VehicleState:
    __slots__ = ("vehicle_id", "routes", "cumulative_micro", "distance_m_total",
                 "last_update_ms", "last_toll")

    def __init__(self, vehicle_id: str, history: int):
        self.vehicle_id = vehicle_id
        self.routes: deque = deque(maxlen=history)
        self.cumulative_micro = 0
        self.distance_m_total = 0.0
        self.last_update_ms = 0
        self.last_toll: dict | None = None

    def summary(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "cumulative_eur": eur_2dp(self.cumulative_micro),
            "cumulative_micro": self.cumulative_micro,
            "distance_m_total": self.distance_m_total,
            "last_update_ms": self.last_update_ms,
            "route": self.routes[-1] if self.routes else None,
            "routes_held": len(self.routes),
        }

    def detail(self) -> dict:
        view = self.summary()
        view["routes"] = list(self.routes)
        return view


class _EventClient:
    def __init__(self, cap: int):
        self.lines: queue.Queue = queue.Queue(maxsize=cap)
        self.dead = threading.Event()


class _EventHub:
    """Fan-out of serialized event lines to bounded per-client queues.

    A client whose queue is full is marked dead and gets disconnected by its
    handler thread: disconnecting the slow is the back-pressure policy.
    """

    def __init__(self, cap: int):
        self._cap = cap
        self._clients: list[_EventClient] = []
        self._lock = threading.Lock()
        self.delivered = 0

    def register(self) -> _EventClient:
        client = _EventClient(self._cap)
        with self._lock:
            self._clients.append(client)
        return client

    def unregister(self, client: _EventClient) -> None:
        with self._lock:
            if client in self._clients:
                self._clients.remove(client)

    def publish(self, event_type: str, payload: dict) -> None:
        line = (json.dumps({"type": event_type, "payload": payload}) + "\n").encode()
        with self._lock:
            for client in self._clients:
                try:
                    client.lines.put_nowait(line)
                    self.delivered += 1
                except queue.Full:
                    client.dead.set()

    def close(self) -> None:
        with self._lock:
            for client in self._clients:
                client.dead.set()

    def __len__(self) -> int:
        with self._lock:
            return len(self._clients)


class Gateway:
    """Serving handle: owns the broker consumer and the HTTP server."""

    def __init__(
        self,
        broker_host: str,
        broker_port: int,
        http_host: str = "127.0.0.1",
        http_port: int = 0,
        zones=None,
        clock=None,
        route_history: int = DEFAULT_ROUTE_HISTORY,
        event_queue_cap: int = DEFAULT_EVENT_QUEUE_CAP,
    ):
        self._broker_host = broker_host
        self._broker_port = broker_port
        self._http_host = http_host
        self._http_port = http_port
        self._zone_records = zones_to_records(zones) if zones else []
        self._clock = clock if clock is not None else SystemClock()
        self._route_history = route_history
        self.registry = Registry(clock=self._clock)
        self.hub = _EventHub(event_queue_cap)

        self._vehicles: dict[str, _VehicleState] = {}
        self._state_lock = threading.Lock()
        self.counts = {"route": 0, "segment": 0, "toll": 0, "config": 0,
                       "announce": 0, "decode_errors": 0}
        self._client = None
        self._subs = []
        self._stale = True
        self._stop = threading.Event()
        self._started_monotonic = time.monotonic()
        self._httpd: ThreadingHTTPServer | None = None
        self._consumer = threading.Thread(target=self._consume_loop, name="gateway-consumer", daemon=True)

    # ------------------------------------------------------------ lifecycle

    def start(self) -> int:
        handler = _make_handler(self)
        self._httpd = ThreadingHTTPServer((self._http_host, self._http_port), handler)
        self._httpd.daemon_threads = True
        self._httpd.block_on_close = False
        self._http_port = self._httpd.server_address[1]
        threading.Thread(target=self._httpd.serve_forever, name="gateway-http", daemon=True).start()
        self._consumer.start()
        logger.info("gateway serving on %s:%d", self._http_host, self._http_port)
        return self._http_port

    def stop(self) -> None:
        self._stop.set()
        self.hub.close()
        if self._httpd is not None:
            self._httpd.shutdown()
            self._httpd.server_close()
        client = self._client
        if client is not None:
            client.close()
        self._consumer.join(timeout=5)
        logger.info("gateway stopped")

    @property
    def port(self) -> int:
        return self._http_port

    @property
    def stale(self) -> bool:
        return self._stale

    # ------------------------------------------------------------ broker side

    def _connect(self) -> bool:
        policy = RetryPolicy(max_attempts=2, base_delay_ms=50, max_delay_ms=200)
        try:
            client = connect_with_retry(self._broker_host, self._broker_port, name="gateway", policy=policy)
        except BusError:
            return False
        try:
            subs = [client.subscribe(topic) for topic in TOPICS]
        except BusError:
            client.close()
            return False
        self._client = client
        self._subs = subs
        self._stale = False
        logger.info("gateway connected to broker %s:%d", self._broker_host, self._broker_port)
        return True

    def _consume_loop(self):
        while not self._stop.is_set():
            client = self._client
            if client is None or client.closed:
                if client is not None and not self._stale:
                    logger.warning("gateway lost the broker; serving stale data while reconnecting")
                self._stale = True
                if not self._connect() and self._stop.wait(0.5):
                    return
                continue
            progressed = False
            for sub in self._subs:
                for payload in sub.drain():
                    progressed = True
                    self._handle(sub.topic, payload)
            if not progressed and self._stop.wait(0.02):
                return

    def _handle(self, topic: str, payload: bytes) -> None:
        now_ms = self._clock.now_ms()
        try:
            if topic == "route":
                msg = decode_json(RouteMsg, payload)
                with self._state_lock:
                    state = self._vehicle_state(msg.vehicle_id)
                    state.routes.append(polyline_to_json(msg.polyline))
                    state.last_update_ms = now_ms
                self.counts["route"] += 1
                self.hub.publish("route", msg.to_dict())
            elif topic == "segment":
                self.counts["segment"] += 1
                self.hub.publish("segment", json.loads(payload))
            elif topic == "toll":
                msg = decode_json(TollMsg, payload)
                with self._state_lock:
                    state = self._vehicle_state(msg.vehicle_id)
                    state.cumulative_micro = msg.cumulative_micro
                    state.distance_m_total += msg.distance_m_total
                    state.last_update_ms = now_ms
                    state.last_toll = msg.to_dict()
                self.counts["toll"] += 1
                self.hub.publish("toll", msg.to_dict())
            elif topic == REGISTRY_TOPIC:
                record = json.loads(payload)
                self.registry.register(
                    record["name"], record["instance_id"], record["address"],
                    ttl_ms=record.get("ttl_ms", 10_000),
                )
                self.counts["announce"] += 1
            elif topic == SIM_CONFIG_TOPIC:
                config = SimConfig.from_dict(json.loads(payload))
                self.counts["config"] += 1
                self.hub.publish("config", config.to_dict())
        except (MessageError, SimConfigError, ValueError, KeyError, UnicodeDecodeError) as exc:
            self.counts["decode_errors"] += 1
            logger.warning("gateway: bad message on %s: %s", topic, exc)

    def _vehicle_state(self, vehicle_id: str) -> _VehicleState:
        state = self._vehicles.get(vehicle_id)
        if state is None:
            state = self._vehicles[vehicle_id] = _VehicleState(vehicle_id, self._route_history)
        return state

    # ------------------------------------------------------------ view side

    def vehicles_view(self) -> list[dict]:
        with self._state_lock:
            return [self._vehicles[vid].summary() for vid in sorted(self._vehicles)]

    def vehicle_detail(self, vehicle_id: str) -> dict | None:
        with self._state_lock:
            state = self._vehicles.get(vehicle_id)
            return state.detail() if state else None

    def tolls_view(self) -> dict:
        with self._state_lock:
            tolls = [self._vehicles[vid].last_toll for vid in sorted(self._vehicles)
                     if self._vehicles[vid].last_toll is not None]
            total = sum(self._vehicles[vid].cumulative_micro for vid in self._vehicles)
        return {"tolls": tolls, "total_eur": eur_str(total)}

    def health_view(self) -> dict:
        status = "degraded" if self._stale else "ok"
        return {
            "status": status,
            "service": "gateway",
            "stale": self._stale,
            "uptime_s": round(time.monotonic() - self._started_monotonic, 3),
            "vehicles": len(self._vehicles),
            "stream_clients": len(self.hub),
            "counts": dict(self.counts),
        }

    def publish_sim_config(self, body: bytes) -> tuple[int, dict]:
        """Validate and forward a simulator config; (HTTP status, response)."""
        try:
            data = json.loads(body)
        except (json.JSONDecodeError, UnicodeDecodeError):
            return 400, {"ok": False, "error": "body is not valid JSON"}
        try:
            config = SimConfig.from_dict(data)
        except SimConfigError as exc:
            return 422, {"ok": False, "error": str(exc)}
        client = self._client
        if client is None or client.closed or self._stale:
            return 503, {"ok": False, "error": "broker unavailable, config not applied"}
        try:
            client.publish(SIM_CONFIG_TOPIC, json.dumps(config.to_dict()).encode())
        except BusError:
            return 503, {"ok": False, "error": "broker unavailable, config not applied"}
        return 200, {"ok": True, "config": config.to_dict()}


def _make_handler(gateway: Gateway):
    class Handler(BaseHTTPRequestHandler):
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):  # route through logging, not stderr
            logger.debug("http: " + fmt, *args)

        def _send_json(self, code: int, obj) -> None:
            body = json.dumps(obj).encode()
            self.send_response(code)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(body)))
            self.end_headers()
            self.wfile.write(body)

        def do_GET(self):
            path = self.path.split("?", 1)[0].rstrip("/") or "/"
            if path == "/healthz":
                view = gateway.health_view()
                self._send_json(200 if view["status"] == "ok" else 503, view)
            elif path == "/vehicles":
                self._send_json(200, {"vehicles": gateway.vehicles_view()})
            elif path.startswith("/vehicles/"):
                detail = gateway.vehicle_detail(path[len("/vehicles/"):])
                if detail is None:
                    self._send_json(404, {"error": "unknown vehicle"})
                else:
                    self._send_json(200, detail)
            elif path == "/tolls":
                self._send_json(200, gateway.tolls_view())
            elif path == "/registry":
                self._send_json(200, {"services": gateway.registry.snapshot()})
            elif path == "/zones":
                self._send_json(200, {"zones": gateway._zone_records})
            elif path == "/events":
                self._stream_events()
            else:
                self._send_json(404, {"error": "no such endpoint"})

        def do_POST(self):
            path = self.path.split("?", 1)[0].rstrip("/")
            if path != "/sim/config":
                self._send_json(404, {"error": "no such endpoint"})
                return
            length = int(self.headers.get("Content-Length") or 0)
            if length <= 0 or length > MAX_BODY_BYTES:
                self._send_json(400, {"ok": False, "error": "missing or oversized body"})
                return
            code, obj = gateway.publish_sim_config(self.rfile.read(length))
            self._send_json(code, obj)

        def _stream_events(self):
            client = gateway.hub.register()
            self.send_response(200)
            self.send_header("Content-Type", "application/x-ndjson")
            self.send_header("Cache-Control", "no-store")
            self.send_header("Connection", "close")
            self.end_headers()
            self.connection.settimeout(5.0)
            try:
                while not client.dead.is_set() and not gateway._stop.is_set():
                    try:
                        line = client.lines.get(timeout=0.5)
                    except queue.Empty:
                        continue
                    self.wfile.write(line)
                    self.wfile.flush()
            except OSError:
                pass  # client went away (or is too slow); that's the policy
            finally:
                gateway.hub.unregister(client)
                self.close_connection = True

    return Handler
