"""Deterministic vehicle traffic generator.

Vehicles random-walk the road network at constant speed, turning at nodes via
a seeded RNG (never doubling back when another edge is available), and emit a
GPS update whenever their update interval has elapsed. All randomness flows
from one seeded generator, so identical (seed, config sequence, step
schedule) produces identical update streams.

Movement and emission cadence run on logical time advanced by ``step(dt_ms)``;
message timestamps come from the injected clock, so unit tests get fully
deterministic bytes while the live service stamps real wall time.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass

from tollgrid.framekit import SystemClock, TraceContext, new_trace_id
from tollgrid.geo import GeoPoint
from tollgrid.geo.primitives import EARTH_RADIUS_M
from tollgrid.services import LocationUpdate

M_PER_DEG = EARTH_RADIUS_M * math.pi / 180.0

DEFAULT_VEHICLE_COUNT = 10
DEFAULT_UPDATE_INTERVAL_MS = 5_000
DEFAULT_GPS_NOISE_M = 3.0
DEFAULT_SPEED_MPS = 10.0


class SimConfigError(ValueError):
    """Rejected simulator configuration."""


@dataclass(frozen=True)
class SimConfig:
    vehicle_count: int = DEFAULT_VEHICLE_COUNT
    update_interval_ms: int = DEFAULT_UPDATE_INTERVAL_MS
    gps_noise_m: float = DEFAULT_GPS_NOISE_M
    seed: int | None = None  # None on reconfiguration = keep the current RNG stream

    def __post_init__(self):
        if not isinstance(self.vehicle_count, int) or isinstance(self.vehicle_count, bool) or self.vehicle_count < 1:
            raise SimConfigError("vehicle_count must be an integer >= 1")
        if not isinstance(self.update_interval_ms, int) or isinstance(self.update_interval_ms, bool) or self.update_interval_ms < 10:
            raise SimConfigError("update_interval_ms must be an integer >= 10")
        if not isinstance(self.gps_noise_m, (int, float)) or isinstance(self.gps_noise_m, bool) or not math.isfinite(self.gps_noise_m) or self.gps_noise_m < 0:
            raise SimConfigError("gps_noise_m must be a finite number >= 0")
        if self.seed is not None and (not isinstance(self.seed, int) or isinstance(self.seed, bool)):
            raise SimConfigError("seed must be an integer or null")

    def to_dict(self) -> dict:
        return {
            "vehicle_count": self.vehicle_count,
            "update_interval_ms": self.update_interval_ms,
            "gps_noise_m": float(self.gps_noise_m),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, data) -> "SimConfig":
        if not isinstance(data, dict):
            raise SimConfigError("config must be a JSON object")
        unknown = set(data) - {"vehicle_count", "update_interval_ms", "gps_noise_m", "seed"}
        if unknown:
            raise SimConfigError("unknown config fields: %s" % ", ".join(sorted(unknown)))
        defaults = cls()
        return cls(
            vehicle_count=data.get("vehicle_count", defaults.vehicle_count),
            update_interval_ms=data.get("update_interval_ms", defaults.update_interval_ms),
            gps_noise_m=data.get("gps_noise_m", defaults.gps_noise_m),
            seed=data.get("seed"),
        )


@dataclass
class VehicleState:
    vehicle_id: str
    edge_id: str
    t: float  # position along the edge, 0 at from_node, 1 at to_node
    toward: str  # node id the vehicle is moving toward
    speed_mps: float
    next_seq: int
    last_emit_ms: int


class TrafficSim:
    def __init__(self, net, config: SimConfig, clock=None, speed_mps: float = DEFAULT_SPEED_MPS):
        if not net.edges:
            raise SimConfigError("network has no edges")
        self._net = net
        self._config = config
        self._clock = clock if clock is not None else SystemClock()
        self._speed_mps = speed_mps
        self._rng = random.Random(config.seed if config.seed is not None else 0)
        self._now_ms = 0  # logical time driving movement and emission cadence
        self._vehicles: dict[str, VehicleState] = {}
        self._retired_seq: dict[str, int] = {}  # keeps seq monotonic across shrink/grow
        for i in range(config.vehicle_count):
            self._spawn("v%03d" % i)

    @property
    def config(self) -> SimConfig:
        return self._config

    @property
    def vehicle_ids(self) -> list[str]:
        return sorted(self._vehicles)

    def state_of(self, vehicle_id: str) -> VehicleState:
        return self._vehicles[vehicle_id]

    def _spawn(self, vehicle_id: str) -> None:
        node = self._rng.choice(sorted(self._net.nodes))
        edge_id = self._rng.choice(sorted(self._net.adjacency[node]))
        edge = self._net.edges[edge_id]
        toward = edge.to_node if edge.from_node == node else edge.from_node
        t = 0.0 if node == edge.from_node else 1.0
        self._vehicles[vehicle_id] = VehicleState(
            vehicle_id, edge_id, t, toward, self._speed_mps,
            self._retired_seq.get(vehicle_id, 0), self._now_ms,
        )

    # -- movement -----------------------------------------------------------

    def _advance(self, v: VehicleState, dt_ms: float) -> None:
        dist = v.speed_mps * dt_ms / 1000.0
        while dist > 1e-9:
            edge = self._net.edges[v.edge_id]
            if v.toward == edge.to_node:
                remaining = (1.0 - v.t) * edge.length_m
                direction = 1.0
            else:
                remaining = v.t * edge.length_m
                direction = -1.0
            if dist < remaining - 1e-9:
                v.t = min(1.0, max(0.0, v.t + direction * dist / edge.length_m))
                return
            dist -= remaining
            arrived = v.toward
            options = sorted(self._net.adjacency[arrived])
            if len(options) > 1:
                options = [eid for eid in options if eid != v.edge_id]
            next_id = options[0] if len(options) == 1 else self._rng.choice(options)
            nxt = self._net.edges[next_id]
            v.edge_id = next_id
            if nxt.from_node == arrived:
                v.t, v.toward = 0.0, nxt.to_node
            else:
                v.t, v.toward = 1.0, nxt.from_node

    def position_of(self, v: VehicleState) -> GeoPoint:
        edge = self._net.edges[v.edge_id]
        a = self._net.nodes[edge.from_node]
        b = self._net.nodes[edge.to_node]
        return GeoPoint(a.lat + v.t * (b.lat - a.lat), a.lon + v.t * (b.lon - a.lon))

    def _noisy(self, p: GeoPoint, sigma_m: float) -> GeoPoint:
        if sigma_m == 0:
            return p
        dlat = self._rng.gauss(0.0, sigma_m) / M_PER_DEG
        dlon = self._rng.gauss(0.0, sigma_m) / (M_PER_DEG * math.cos(math.radians(p.lat)))
        return GeoPoint(p.lat + dlat, p.lon + dlon)

    # -- ticking --------------------------------------------------------------

    def step(self, dt_ms: float) -> list[LocationUpdate]:
        """Advance logical time by dt and return the updates that came due."""
        if dt_ms < 0:
            raise ValueError("dt_ms must be non-negative")
        if dt_ms == 0:
            return []
        self._now_ms += dt_ms
        updates = []
        for vehicle_id in sorted(self._vehicles):
            v = self._vehicles[vehicle_id]
            self._advance(v, dt_ms)
            if self._now_ms - v.last_emit_ms >= self._config.update_interval_ms:
                updates.append(self._emit(v))
                v.last_emit_ms = self._now_ms
        return updates

    def _emit(self, v: VehicleState) -> LocationUpdate:
        point = self._noisy(self.position_of(v), self._config.gps_noise_m)
        trace = TraceContext(new_trace_id(self._rng), v.vehicle_id, v.next_seq)
        trace.stamp("emit", self._clock.now_us())
        update = LocationUpdate(v.vehicle_id, point, self._clock.now_ms(), v.next_seq, trace)
        v.next_seq += 1
        return update

    # -- reconfiguration -------------------------------------------------------

    def apply_config(self, cfg: SimConfig) -> None:
        """Adopt a new configuration; takes effect from the next step."""
        if cfg.seed is not None:
            self._rng = random.Random(cfg.seed)
        old_count = self._config.vehicle_count
        if cfg.vehicle_count < old_count:
            for i in range(cfg.vehicle_count, old_count):
                vid = "v%03d" % i
                self._retired_seq[vid] = self._vehicles.pop(vid).next_seq
        elif cfg.vehicle_count > old_count:
            for i in range(old_count, cfg.vehicle_count):
                self._spawn("v%03d" % i)
        self._config = cfg
