"""Pipeline message types, their JSON codecs, and the toll rate table.

Money is carried as integer micro-euros internally and rendered as 6-decimal
strings in JSON, so cumulative sums stay exact. Geo points serialize as
``{"lat": .., "lon": ..}`` objects and polylines as arrays of them.
"""

from __future__ import annotations

from dataclasses import dataclass
from decimal import Decimal, InvalidOperation
from pathlib import Path
import json

from tollgrid.framekit import TraceContext, TraceError
from tollgrid.geo import GeoPoint, GeometryError, LeveledSegment, Polyline

MICRO_PER_EUR = 1_000_000


class MessageError(ValueError):
    """Message fails schema or domain validation."""


# ---------------------------------------------------------------- money


def eur_str(micro: int) -> str:
    """Render integer micro-euros as a 6-decimal string ("5560" -> "0.005560")."""
    if micro < 0:
        raise MessageError("negative amount: %d" % micro)
    return "%d.%06d" % divmod(micro, MICRO_PER_EUR)


def parse_eur(text) -> int:
    """Parse a euro amount (string or number) to integer micro-euros."""
    try:
        amount = Decimal(str(text))
    except InvalidOperation as exc:
        raise MessageError("bad money literal %r" % (text,)) from exc
    micro = amount * MICRO_PER_EUR
    if micro != int(micro):
        raise MessageError("%r has more than 6 decimal places" % (text,))
    if micro < 0:
        raise MessageError("negative amount: %r" % (text,))
    return int(micro)


@dataclass(frozen=True)
class RateTable:
    """Per-km fee by pollution level, in micro-euros. Total over levels 0..5."""

    micro_per_km: tuple

    def __post_init__(self):
        if len(self.micro_per_km) != 6:
            raise MessageError("rate table must cover levels 0..5")
        if self.micro_per_km[0] != 0:
            raise MessageError("rate for level 0 must be 0")
        for a, b in zip(self.micro_per_km, self.micro_per_km[1:]):
            if b <= a:
                raise MessageError("rates must be strictly increasing in level")

    def rate_micro(self, level: int) -> int:
        if not 0 <= level <= 5:
            raise MessageError("unknown pollution level %r" % (level,))
        return self.micro_per_km[level]

    @classmethod
    def default(cls) -> "RateTable":
        # 0.05 EUR/km per pollution level step
        return cls(tuple(level * 50_000 for level in range(6)))

    @classmethod
    def from_dict(cls, data: dict) -> "RateTable":
        try:
            micro = tuple(parse_eur(data[str(level)]) for level in range(6))
        except KeyError as exc:
            raise MessageError("rate table missing level %s" % exc) from exc
        return cls(micro)

    @classmethod
    def from_file(cls, path) -> "RateTable":
        with open(Path(path), encoding="utf-8") as fh:
            return cls.from_dict(json.load(fh))

    def to_dict(self) -> dict:
        return {str(level): eur_str(m) for level, m in enumerate(self.micro_per_km)}


# ---------------------------------------------------------------- geo json


def point_to_json(p: GeoPoint) -> dict:
    return {"lat": p.lat, "lon": p.lon}


def point_from_json(data) -> GeoPoint:
    if not isinstance(data, dict):
        raise MessageError("point must be an object, got %r" % (data,))
    try:
        return GeoPoint(float(data["lat"]), float(data["lon"]))
    except (KeyError, TypeError, ValueError) as exc:
        raise MessageError("bad point %r" % (data,)) from exc


def polyline_to_json(pl: Polyline) -> list:
    return [point_to_json(p) for p in pl.points]


def polyline_from_json(data) -> Polyline:
    if not isinstance(data, list):
        raise MessageError("polyline must be an array")
    try:
        return Polyline([point_from_json(p) for p in data])
    except GeometryError as exc:
        raise MessageError(str(exc)) from exc


def _trace_from_json(data) -> TraceContext:
    try:
        return TraceContext.from_dict(data)
    except TraceError as exc:
        raise MessageError(str(exc)) from exc


def _require(data: dict, field: str, kinds) -> object:
    try:
        value = data[field]
    except (KeyError, TypeError) as exc:
        raise MessageError("missing field %r" % field) from exc
    if not isinstance(value, kinds) or isinstance(value, bool):
        raise MessageError("field %r has wrong type %s" % (field, type(value).__name__))
    return value


# ---------------------------------------------------------------- messages


@dataclass
class LocationUpdate:
    vehicle_id: str
    point: GeoPoint
    ts_ms: int
    seq: int
    trace: TraceContext

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "point": point_to_json(self.point),
            "ts_ms": self.ts_ms,
            "seq": self.seq,
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "LocationUpdate":
        vehicle_id = _require(data, "vehicle_id", str)
        ts_ms = _require(data, "ts_ms", int)
        seq = _require(data, "seq", int)
        if not vehicle_id:
            raise MessageError("vehicle_id must be non-empty")
        if seq < 0:
            raise MessageError("seq must be non-negative")
        try:
            point = point_from_json(data["point"])
        except KeyError as exc:
            raise MessageError("missing field 'point'") from exc
        return cls(vehicle_id, point, ts_ms, seq, _trace_from_json(data.get("trace")))


@dataclass
class RouteMsg:
    vehicle_id: str
    polyline: Polyline
    window: tuple  # (first_seq, last_seq)
    trace: TraceContext

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "polyline": polyline_to_json(self.polyline),
            "window": [self.window[0], self.window[1]],
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "RouteMsg":
        vehicle_id = _require(data, "vehicle_id", str)
        window = _require(data, "window", list)
        if len(window) != 2 or not all(isinstance(s, int) for s in window) or window[0] >= window[1]:
            raise MessageError("window must be [first_seq, last_seq] with first < last")
        polyline = polyline_from_json(data.get("polyline"))
        return cls(vehicle_id, polyline, (window[0], window[1]), _trace_from_json(data.get("trace")))


def segment_to_json(seg: LeveledSegment) -> dict:
    return {
        "polyline": polyline_to_json(seg.polyline),
        "level": seg.level,
        "length_m": seg.length_m,
    }


def segment_from_json(data) -> LeveledSegment:
    if not isinstance(data, dict):
        raise MessageError("segment must be an object")
    level = _require(data, "level", int)
    length_m = _require(data, "length_m", (int, float))
    polyline = polyline_from_json(data.get("polyline"))
    try:
        return LeveledSegment(polyline, level, float(length_m))
    except GeometryError as exc:
        raise MessageError(str(exc)) from exc


@dataclass
class SegmentMsg:
    vehicle_id: str
    segments: list  # of LeveledSegment
    trace: TraceContext

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "segments": [segment_to_json(s) for s in self.segments],
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "SegmentMsg":
        vehicle_id = _require(data, "vehicle_id", str)
        raw = _require(data, "segments", list)
        if not raw:
            raise MessageError("segments must be non-empty")
        return cls(vehicle_id, [segment_from_json(s) for s in raw], _trace_from_json(data.get("trace")))


@dataclass
class TollMsg:
    vehicle_id: str
    increment_micro: int
    cumulative_micro: int
    distance_m_total: float
    trace: TraceContext

    def to_dict(self) -> dict:
        return {
            "vehicle_id": self.vehicle_id,
            "increment_eur": eur_str(self.increment_micro),
            "cumulative_eur": eur_str(self.cumulative_micro),
            "distance_m_total": self.distance_m_total,
            "trace": self.trace.to_dict(),
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TollMsg":
        vehicle_id = _require(data, "vehicle_id", str)
        increment = parse_eur(_require(data, "increment_eur", str))
        cumulative = parse_eur(_require(data, "cumulative_eur", str))
        distance = _require(data, "distance_m_total", (int, float))
        if distance < 0:
            raise MessageError("distance_m_total must be non-negative")
        return cls(vehicle_id, increment, cumulative, float(distance), _trace_from_json(data.get("trace")))


def encode_json(msg) -> bytes:
    return json.dumps(msg.to_dict(), separators=(",", ":")).encode()


def decode_json(cls, payload: bytes):
    try:
        data = json.loads(payload)
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise MessageError("payload is not valid JSON: %s" % exc) from exc
    if not isinstance(data, dict):
        raise MessageError("message must be a JSON object")
    return cls.from_dict(data)
