"""Manual trace-context propagation.

Every pipeline message carries a trace context: a random 128-bit id plus an
append-only list of (stage, microsecond timestamp) stamps. Services stamp the
context on entry and exit so the benchmark can attribute latency per stage.
"""

from __future__ import annotations

import random
from dataclasses import dataclass, field

STAGES = (
    "emit",
    "matcher_in",
    "matcher_out",
    "pollution_in",
    "pollution_out",
    "toll_in",
    "toll_out",
)


class TraceError(ValueError):
    """Unknown stage, duplicate stamp, or malformed serialized context."""


def new_trace_id(rng: random.Random | None = None) -> str:
    rng = rng if rng is not None else random.Random()
    return "%032x" % rng.getrandbits(128)


@dataclass
class TraceContext:
    trace_id: str
    vehicle_id: str
    seq: int
    stage_stamps: list = field(default_factory=list)

    def stamp(self, stage: str, now_us: int) -> "TraceContext":
        """Append (stage, now_us); each stage may be stamped once."""
        if stage not in STAGES:
            raise TraceError("unknown stage %r" % stage)
        if any(s == stage for s, _ in self.stage_stamps):
            raise TraceError("stage %r already stamped" % stage)
        self.stage_stamps.append((stage, int(now_us)))
        return self

    def stage_us(self, stage: str) -> int | None:
        for s, us in self.stage_stamps:
            if s == stage:
                return us
        return None

    def to_dict(self) -> dict:
        return {
            "trace_id": self.trace_id,
            "vehicle_id": self.vehicle_id,
            "seq": self.seq,
            "stage_stamps": [[s, us] for s, us in self.stage_stamps],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "TraceContext":
        try:
            trace_id = data["trace_id"]
            vehicle_id = data["vehicle_id"]
            seq = data["seq"]
            raw = data["stage_stamps"]
        except (KeyError, TypeError) as exc:
            raise TraceError("malformed trace context: %r" % (data,)) from exc
        if not isinstance(trace_id, str) or not isinstance(vehicle_id, str) or not isinstance(seq, int):
            raise TraceError("malformed trace context fields")
        stamps = []
        seen = set()
        for entry in raw:
            if not isinstance(entry, (list, tuple)) or len(entry) != 2:
                raise TraceError("malformed stamp %r" % (entry,))
            stage, us = entry
            if stage not in STAGES or stage in seen or not isinstance(us, int):
                raise TraceError("malformed stamp %r" % (entry,))
            seen.add(stage)
            stamps.append((stage, us))
        return cls(trace_id, vehicle_id, seq, stamps)
