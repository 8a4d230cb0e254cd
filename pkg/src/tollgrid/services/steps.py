"""The three pipeline steps as plain, broker-free objects.

Each step consumes one decoded message and returns the next message in the
chain (or None when there is nothing to emit yet). The service runner wires
these to the bus; tests drive them directly.
"""

from __future__ import annotations

import logging

from tollgrid.framekit import SystemClock
from tollgrid.geo import build_index, polyline_length_m, split_by_zones
from tollgrid.roadnet import MatchingError, match_trace
from tollgrid.services.messages import RateTable, RouteMsg, SegmentMsg, TollMsg

logger = logging.getLogger(__name__)


class MapMatcher:
    """Pairs consecutive GPS updates per vehicle and matches them to roads.

    Window size is 2: every update after the first yields one route whose
    first vertex is the previous route's last vertex, so routes chain without
    gaps and distance is conserved across the pipeline.
    """

    def __init__(self, net, clock=None):
        self._net = net
        self._clock = clock if clock is not None else SystemClock()
        self._last = {}  # vehicle_id -> LocationUpdate
        self.processed = 0
        self.errors = 0

    def step(self, update) -> RouteMsg | None:
        self.processed += 1
        update.trace.stamp("matcher_in", self._clock.now_us())
        prev = self._last.get(update.vehicle_id)
        if prev is not None and update.seq <= prev.seq:
            self.errors += 1
            logger.warning(
                "matcher: stale seq %d (last %d) for %s, trace %s",
                update.seq, prev.seq, update.vehicle_id, update.trace.trace_id,
            )
            return None
        self._last[update.vehicle_id] = update
        if prev is None:
            return None  # not ready: a route needs two points
        try:
            polyline = match_trace(self._net, [prev.point, update.point])
        except MatchingError as exc:
            self.errors += 1
            logger.warning("matcher: dropping trace %s: %s", update.trace.trace_id, exc)
            return None
        update.trace.stamp("matcher_out", self._clock.now_us())
        return RouteMsg(update.vehicle_id, polyline, (prev.seq, update.seq), update.trace)


class PollutionMatcher:
    """Splits matched routes by pollution zone.

    The zone lookup is pluggable so the runner can wrap it in a circuit
    breaker and timeout (it plays the role of an external zone database).
    """

    def __init__(self, zones, index=None, clock=None, lookup=None):
        self._zones = zones
        self._index = index if index is not None else build_index(zones)
        self._clock = clock if clock is not None else SystemClock()
        self._lookup = lookup if lookup is not None else self._split
        self.processed = 0
        self.errors = 0

    def _split(self, polyline):
        return split_by_zones(polyline, self._zones, self._index)

    def step(self, route: RouteMsg) -> SegmentMsg | None:
        self.processed += 1
        route.trace.stamp("pollution_in", self._clock.now_us())
        try:
            segments = self._lookup(route.polyline)
        except Exception as exc:
            self.errors += 1
            logger.warning("pollution: dropping trace %s: %s", route.trace.trace_id, exc)
            return None
        route.trace.stamp("pollution_out", self._clock.now_us())
        return SegmentMsg(route.vehicle_id, segments, route.trace)


class TollCalculator:
    """Accumulates per-vehicle fees from leveled segments.

    increment = sum over segments of (length_m / 1000) * rate(level), rounded
    once per message to integer micro-euros; the cumulative sum is then exact.
    Per-vehicle state lives here only — a restart starts from zero.
    """

    def __init__(self, rates: RateTable | None = None, clock=None):
        self._rates = rates if rates is not None else RateTable.default()
        self._clock = clock if clock is not None else SystemClock()
        self._cumulative = {}  # vehicle_id -> micro-euros
        self.processed = 0
        self.errors = 0

    def step(self, seg: SegmentMsg) -> TollMsg | None:
        self.processed += 1
        seg.trace.stamp("toll_in", self._clock.now_us())
        try:
            increment_micro = round(
                sum(s.length_m * self._rates.rate_micro(s.level) for s in seg.segments) / 1000.0
            )
        except Exception as exc:
            self.errors += 1
            logger.warning("toll: dropping trace %s: %s", seg.trace.trace_id, exc)
            return None
        distance_m = sum(s.length_m for s in seg.segments)
        cumulative = self._cumulative.get(seg.vehicle_id, 0) + increment_micro
        self._cumulative[seg.vehicle_id] = cumulative
        seg.trace.stamp("toll_out", self._clock.now_us())
        return TollMsg(seg.vehicle_id, increment_micro, cumulative, distance_m, seg.trace)

    def cumulative_micro(self, vehicle_id: str) -> int:
        return self._cumulative.get(vehicle_id, 0)


def route_length_m(route: RouteMsg) -> float:
    return polyline_length_m(route.polyline)
