"""In-process service registry with TTL expiry and round-robin choice.

The registry lives inside the gateway process; services announce themselves
over the message bus and the gateway feeds those announcements in here. A
record stays discoverable until its heartbeat goes stale (TTL, default 10 s).
"""

from __future__ import annotations

import threading
from dataclasses import dataclass

from tollgrid.framekit.clock import SystemClock

DEFAULT_TTL_MS = 10_000


class UnknownInstanceError(LookupError):
    """Heartbeat or lookup for an instance_id that was never registered."""


@dataclass
class ServiceRecord:
    name: str
    instance_id: str
    address: str
    registered_at_ms: int
    last_heartbeat_ms: int
    ttl_ms: int = DEFAULT_TTL_MS

    def is_live(self, now_ms: int) -> bool:
        return now_ms - self.last_heartbeat_ms <= self.ttl_ms

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "instance_id": self.instance_id,
            "address": self.address,
            "registered_at_ms": self.registered_at_ms,
            "last_heartbeat_ms": self.last_heartbeat_ms,
            "ttl_ms": self.ttl_ms,
        }


class Registry:
    """Thread-safe name -> live instances map.

    ``discover`` returns live records in registration order; ``pick`` applies
    a per-name round-robin counter on top of that order.
    """

    def __init__(self, clock=None):
        self._clock = clock if clock is not None else SystemClock()
        self._lock = threading.Lock()
        self._records: dict[str, ServiceRecord] = {}  # instance_id -> record
        self._rr: dict[str, int] = {}  # service name -> round-robin cursor

    def register(self, name: str, instance_id: str, address: str, ttl_ms: int = DEFAULT_TTL_MS) -> ServiceRecord:
        """Add an instance, or refresh it if the same instance re-announces."""
        if not name or not instance_id:
            raise ValueError("name and instance_id must be non-empty")
        if ttl_ms <= 0:
            raise ValueError("ttl_ms must be positive")
        now = self._clock.now_ms()
        with self._lock:
            existing = self._records.get(instance_id)
            if existing is not None and existing.name != name:
                raise ValueError(
                    "instance_id %r already registered under service %r" % (instance_id, existing.name)
                )
            registered_at = existing.registered_at_ms if existing is not None else now
            record = ServiceRecord(name, instance_id, address, registered_at, now, ttl_ms)
            self._records[instance_id] = record
            return record

    def heartbeat(self, instance_id: str) -> None:
        with self._lock:
            record = self._records.get(instance_id)
            if record is None:
                raise UnknownInstanceError(instance_id)
            record.last_heartbeat_ms = self._clock.now_ms()

    def discover(self, name: str) -> list[ServiceRecord]:
        """Live instances of a service, oldest registration first."""
        now = self._clock.now_ms()
        with self._lock:
            live = [r for r in self._records.values() if r.name == name and r.is_live(now)]
        live.sort(key=lambda r: (r.registered_at_ms, r.instance_id))
        return live

    def pick(self, name: str) -> ServiceRecord | None:
        """Round-robin over the live instances; None when there are none."""
        live = self.discover(name)
        if not live:
            return None
        with self._lock:
            cursor = self._rr.get(name, 0)
            self._rr[name] = cursor + 1
        return live[cursor % len(live)]

    def snapshot(self) -> list[dict]:
        """All live records as plain dicts (gateway /registry payload)."""
        now = self._clock.now_ms()
        with self._lock:
            live = [r.to_dict() for r in self._records.values() if r.is_live(now)]
        live.sort(key=lambda d: (d["name"], d["registered_at_ms"], d["instance_id"]))
        return live
