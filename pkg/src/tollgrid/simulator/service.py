"""Broker-connected simulator loop.

Publishes ``location.update`` on a fixed logical tick (one update interval per
tick, so vehicle motion is reproducible run to run) and listens on
``sim.config`` for reconfiguration. Every config attempt is answered on
``sim.config.ack``: accepted configs echo the adopted settings, rejected ones
carry the validation error and leave the old config running.
"""

from __future__ import annotations

import json
import logging
import threading
import uuid

from tollgrid.framekit import SystemClock
from tollgrid.msgbus import BusError
from tollgrid.services import encode_json
from tollgrid.services.runner import (
    DEFAULT_ANNOUNCE_INTERVAL_MS,
    DEFAULT_TTL_MS,
    REGISTRY_TOPIC,
    connect_with_retry,
)
from tollgrid.simulator.sim import DEFAULT_SPEED_MPS, SimConfig, SimConfigError, TrafficSim

logger = logging.getLogger(__name__)

SIM_CONFIG_TOPIC = "sim.config"
SIM_ACK_TOPIC = "sim.config.ack"
LOCATION_TOPIC = "location.update"


class SimulatorService:
    """Owns a TrafficSim and a broker connection; tick loop in a daemon thread."""

    def __init__(
        self,
        net,
        config: SimConfig,
        broker_host: str,
        broker_port: int,
        clock=None,
        speed_mps: float = DEFAULT_SPEED_MPS,
        max_messages: int | None = None,
        announce_interval_ms: int = DEFAULT_ANNOUNCE_INTERVAL_MS,
    ):
        self._clock = clock if clock is not None else SystemClock()
        self.sim = TrafficSim(net, config, clock=self._clock, speed_mps=speed_mps)
        self.instance_id = "simulator-%s" % uuid.uuid4().hex[:8]
        self._announce_interval_ms = announce_interval_ms
        self._client = connect_with_retry(broker_host, broker_port, name="simulator")
        self._config_sub = self._client.subscribe(SIM_CONFIG_TOPIC)
        self._max_messages = max_messages
        self.published = 0
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._run, name="simulator", daemon=True)
        self._announcer = threading.Thread(target=self._announce_loop, name="simulator-announce", daemon=True)
        self._thread.start()
        self._announcer.start()
        logger.info(
            "simulator started: %d vehicles, interval %d ms, noise %.1f m",
            config.vehicle_count, config.update_interval_ms, config.gps_noise_m,
        )

    def _announce_loop(self):
        announcement = json.dumps(
            {
                "name": "simulator",
                "instance_id": self.instance_id,
                "address": "embedded",
                "ttl_ms": DEFAULT_TTL_MS,
            }
        ).encode()
        while not self._stop.is_set():
            try:
                self._client.publish(REGISTRY_TOPIC, announcement)
            except BusError:
                break
            if self._stop.wait(self._announce_interval_ms / 1000.0):
                break

    def _apply_pending_configs(self) -> None:
        for payload in self._config_sub.drain():
            try:
                cfg = SimConfig.from_dict(json.loads(payload))
                self.sim.apply_config(cfg)
            except (SimConfigError, json.JSONDecodeError, UnicodeDecodeError) as exc:
                logger.warning("simulator: config rejected: %s", exc)
                ack = {"ok": False, "error": str(exc), "config": self.sim.config.to_dict()}
            else:
                logger.info("simulator: config applied: %s", cfg.to_dict())
                ack = {"ok": True, "error": None, "config": cfg.to_dict()}
            self._client.publish(SIM_ACK_TOPIC, json.dumps(ack).encode())

    def _run(self):
        try:
            while not self._stop.is_set():
                self._apply_pending_configs()
                interval_ms = self.sim.config.update_interval_ms
                if self._stop.wait(interval_ms / 1000.0):
                    break
                self._apply_pending_configs()
                for update in self.sim.step(interval_ms):
                    self._client.publish(LOCATION_TOPIC, encode_json(update))
                    self.published += 1
                    if self._max_messages is not None and self.published >= self._max_messages:
                        logger.info("simulator: reached %d messages, stopping", self.published)
                        return
        except BusError as exc:
            if not self._stop.is_set():
                logger.error("simulator: lost broker connection: %s", exc)

    @property
    def finished(self) -> bool:
        return not self._thread.is_alive()

    def join(self, timeout_s: float | None = None) -> None:
        self._thread.join(timeout_s)

    def stop(self) -> None:
        self._stop.set()
        self._thread.join(timeout=5)
        self._announcer.join(timeout=5)
        self._client.close()
        logger.info("simulator stopped after %d updates", self.published)
