"""Broker-connected service harness.

Wires a pipeline step to its input/output topics, announces the instance on
``registry.announce`` so the gateway's registry can discover it, serves
``/healthz`` with processing counters, and keeps consuming until stopped.
Messages are processed strictly in arrival order by a single consumer thread.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid

from tollgrid.framekit import (
    CircuitBreaker,
    HealthServer,
    RetryExhaustedError,
    RetryPolicy,
    SystemClock,
    retry,
    with_timeout,
)
from tollgrid.geo import build_index, split_by_zones
from tollgrid.msgbus import BusClient, BusError
from tollgrid.services.messages import (
    LocationUpdate,
    MessageError,
    RateTable,
    RouteMsg,
    SegmentMsg,
    decode_json,
    encode_json,
)
from tollgrid.services.steps import MapMatcher, PollutionMatcher, TollCalculator

logger = logging.getLogger(__name__)

REGISTRY_TOPIC = "registry.announce"
DEFAULT_ANNOUNCE_INTERVAL_MS = 3_000
DEFAULT_TTL_MS = 10_000
DEFAULT_ZONE_TIMEOUT_MS = 1_000

# kind -> (input topic, input message class, output topic)
SERVICE_KINDS = {
    "mapmatcher": ("location.update", LocationUpdate, "route"),
    "pollution": ("route", RouteMsg, "segment"),
    "tollcalc": ("segment", SegmentMsg, "toll"),
}


def connect_with_retry(host: str, port: int, name: str = "", policy: RetryPolicy | None = None) -> BusClient:
    """Connect to the broker, retrying with back-off; BusError when exhausted."""
    policy = policy if policy is not None else RetryPolicy()
    try:
        outcome = retry(lambda: BusClient(host, port, name=name), policy, SystemClock())
    except RetryExhaustedError as exc:
        raise BusError("broker at %s:%d unreachable after %d attempts" % (host, port, exc.attempts)) from exc
    return outcome.value


class Service:
    """One running service instance: consumer loop + announcements + health."""

    def __init__(
        self,
        kind: str,
        step,
        broker_host: str,
        broker_port: int,
        health_host: str = "127.0.0.1",
        health_port: int = 0,
        instance_id: str | None = None,
        announce_interval_ms: int = DEFAULT_ANNOUNCE_INTERVAL_MS,
        ttl_ms: int = DEFAULT_TTL_MS,
    ):
        if kind not in SERVICE_KINDS:
            raise ValueError("unknown service kind %r" % kind)
        self.kind = kind
        self.step = step
        self.instance_id = instance_id or "%s-%s" % (kind, uuid.uuid4().hex[:8])
        self._in_topic, self._in_cls, self._out_topic = SERVICE_KINDS[kind]
        self._announce_interval_ms = announce_interval_ms
        self._ttl_ms = ttl_ms
        self.decode_errors = 0
        self._stop = threading.Event()

        self._health = HealthServer(kind, host=health_host, port=health_port, extra=self._counters)
        self._health.start()
        self.address = "%s:%d" % (health_host, self._health.port)

        self._client = connect_with_retry(broker_host, broker_port, name=self.instance_id)
        self._sub = self._client.subscribe(self._in_topic)

        self._consumer = threading.Thread(target=self._consume_loop, name=self.instance_id, daemon=True)
        self._announcer = threading.Thread(target=self._announce_loop, name=self.instance_id + "-announce", daemon=True)
        self._consumer.start()
        self._announcer.start()
        logger.info("%s started (instance %s, health %s)", kind, self.instance_id, self.address)

    def _counters(self) -> dict:
        return {"processed": self.step.processed, "errors": self.step.errors + self.decode_errors}

    @property
    def health_port(self) -> int:
        return self._health.port

    def _consume_loop(self):
        while not self._stop.is_set():
            payload = self._sub.get(timeout_s=0.2)
            if payload is None:
                if self._client.closed:
                    break
                continue
            try:
                msg = decode_json(self._in_cls, payload)
            except MessageError as exc:
                self.decode_errors += 1
                logger.warning("%s: undecodable message dropped: %s", self.kind, exc)
                continue
            out = self.step.step(msg)
            if out is None:
                continue
            try:
                self._client.publish(self._out_topic, encode_json(out))
            except BusError as exc:
                if not self._stop.is_set():
                    logger.error("%s: lost broker connection: %s", self.kind, exc)
                break

    def _announce_loop(self):
        announcement = json.dumps(
            {
                "name": self.kind,
                "instance_id": self.instance_id,
                "address": self.address,
                "ttl_ms": self._ttl_ms,
            }
        ).encode()
        while not self._stop.is_set():
            try:
                self._client.publish(REGISTRY_TOPIC, announcement)
            except BusError:
                break
            if self._stop.wait(self._announce_interval_ms / 1000.0):
                break

    def stop(self) -> None:
        self._stop.set()
        self._client.close()
        self._consumer.join(timeout=5)
        self._announcer.join(timeout=5)
        self._health.stop()
        logger.info("%s stopped (instance %s)", self.kind, self.instance_id)


def run_service(
    kind: str,
    broker_host: str,
    broker_port: int,
    network=None,
    zones=None,
    rates: RateTable | None = None,
    clock=None,
    health_host: str = "127.0.0.1",
    health_port: int = 0,
    instance_id: str | None = None,
    announce_interval_ms: int = DEFAULT_ANNOUNCE_INTERVAL_MS,
    zone_timeout_ms: int = DEFAULT_ZONE_TIMEOUT_MS,
    breaker: CircuitBreaker | None = None,
) -> Service:
    """Build the step for ``kind`` and start a Service around it."""
    if kind == "mapmatcher":
        if network is None:
            raise ValueError("mapmatcher needs a road network")
        step = MapMatcher(network, clock=clock)
    elif kind == "pollution":
        if zones is None:
            raise ValueError("pollution matcher needs zones")
        index = build_index(zones)
        if breaker is None:
            breaker = CircuitBreaker(name="zone-lookup")
        # The zone lookup plays the role of an external pollution database,
        # so it gets the full resilience treatment.
        def guarded_lookup(polyline, _zones=zones, _index=index):
            return breaker.call(
                lambda: with_timeout(lambda: split_by_zones(polyline, _zones, _index), zone_timeout_ms)
            )

        step = PollutionMatcher(zones, index, clock=clock, lookup=guarded_lookup)
    elif kind == "tollcalc":
        step = TollCalculator(rates, clock=clock)
    else:
        raise ValueError("unknown service kind %r" % kind)
    return Service(
        kind,
        step,
        broker_host,
        broker_port,
        health_host=health_host,
        health_port=health_port,
        instance_id=instance_id,
        announce_interval_ms=announce_interval_ms,
    )
