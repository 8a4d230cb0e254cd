"""Splitting a route polyline into pollution-leveled segments.

Per polyline leg: find where the leg crosses candidate zone edges, cut the
leg at those parameters, classify each piece by its midpoint, then merge
maximal runs of equal level into segments. Level 0 means outside every zone.
"""

from __future__ import annotations

from dataclasses import dataclass

from tollgrid.geo.primitives import (
    GeoPoint,
    GeometryError,
    Polyline,
    polyline_length_m,
)
from tollgrid.geo.zones import PollutionZone, ZoneIndex

OUTSIDE_LEVEL = 0

# Intersection parameters closer than this are considered the same cut.
_T_EPS = 1e-12


@dataclass(frozen=True)
class LeveledSegment:
    """A maximal piece of a route whose interior lies in zones of one level."""

    polyline: Polyline
    level: int
    length_m: float

    def __post_init__(self):
        if not OUTSIDE_LEVEL <= self.level <= 5:
            raise GeometryError(f"segment level {self.level} outside 0..5")


def _interp(a: GeoPoint, b: GeoPoint, t: float) -> GeoPoint:
    # Exact endpoints keep original vertices byte-identical in the output.
    if t <= 0.0:
        return a
    if t >= 1.0:
        return b
    return GeoPoint(a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon))


def _leg_edge_params(a: GeoPoint, b: GeoPoint, c: GeoPoint, d: GeoPoint) -> list[float]:
    """Parameters t on leg a->b where it meets edge c->d (lon/lat plane)."""
    rx, ry = b.lon - a.lon, b.lat - a.lat
    sx, sy = d.lon - c.lon, d.lat - c.lat
    denom = rx * sy - ry * sx
    qpx, qpy = c.lon - a.lon, c.lat - a.lat
    if denom != 0.0:
        t = (qpx * sy - qpy * sx) / denom
        u = (qpx * ry - qpy * rx) / denom
        if _T_EPS < t < 1.0 - _T_EPS and -_T_EPS <= u <= 1.0 + _T_EPS:
            return [t]
        return []
    # Parallel. If collinear, classification can flip where the overlap
    # starts/ends, so cut at the projections of the edge endpoints.
    if qpx * ry - qpy * rx != 0.0:
        return []
    r2 = rx * rx + ry * ry
    if r2 == 0.0:
        return []
    out = []
    for px, py in ((c.lon, c.lat), (d.lon, d.lat)):
        t = ((px - a.lon) * rx + (py - a.lat) * ry) / r2
        if _T_EPS < t < 1.0 - _T_EPS:
            out.append(t)
    return out


def _classify(p: GeoPoint, candidates: list[PollutionZone]) -> int:
    # Zones are non-overlapping; sorted candidates make boundary ties
    # deterministic.
    for z in candidates:
        if z.contains(p):
            return z.level
    return OUTSIDE_LEVEL


def split_by_zones(
    pl: Polyline, zones: list[PollutionZone], index: ZoneIndex
) -> list[LeveledSegment]:
    """Partition the polyline into ordered, maximally merged leveled segments.

    Zones must have been validated as non-overlapping at load time. The
    output covers the polyline in order: concatenating segment polylines
    reproduces the input vertices plus inserted boundary points, and segment
    lengths sum to the polyline length.
    """
    runs: list[tuple[int, list[GeoPoint]]] = []  # (level, points)

    def extend(level: int, p0: GeoPoint, p1: GeoPoint) -> None:
        if runs and runs[-1][0] == level:
            pts = runs[-1][1]
            if p1 != pts[-1]:
                pts.append(p1)
        else:
            runs.append((level, [p0, p1]))

    for a, b in pl.legs():
        candidates = index.candidates(a, b)
        ts = [0.0, 1.0]
        for z in candidates:
            n = len(z.ring)
            for i in range(n):
                ts.extend(_leg_edge_params(a, b, z.ring[i], z.ring[(i + 1) % n]))
        ts.sort()
        cuts = [ts[0]]
        for t in ts[1:]:
            if t - cuts[-1] > _T_EPS:
                cuts.append(t)
        for t0, t1 in zip(cuts, cuts[1:]):
            p0, p1 = _interp(a, b, t0), _interp(a, b, t1)
            if p0 == p1:
                continue
            mid = _interp(a, b, (t0 + t1) / 2.0)
            extend(_classify(mid, candidates), p0, p1)

    segments = []
    for level, pts in runs:
        sub = Polyline(pts)
        segments.append(LeveledSegment(sub, level, polyline_length_m(sub)))
    return segments
