"""Core WGS84 geometry: points, polylines, distances, containment.

Containment and intersection work in the planar lon/lat plane; lengths use
the haversine great-circle formula. At city scale (zones well below 0.5
degrees across) the planar topology error is negligible; this approximation
is deliberate and documented in the README.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

EARTH_RADIUS_M = 6_371_000.0

# Points closer than this (degrees) to a ring edge are treated as boundary.
BOUNDARY_EPS_DEG = 1e-12


class GeometryError(ValueError):
    """Invalid geometric input (out-of-range coordinate, degenerate shape)."""


@dataclass(frozen=True)
class GeoPoint:
    """A WGS84 coordinate, latitude/longitude in degrees."""

    lat: float
    lon: float

    def __post_init__(self):
        if not (math.isfinite(self.lat) and math.isfinite(self.lon)):
            raise GeometryError(f"non-finite coordinate: ({self.lat}, {self.lon})")
        if not -90.0 <= self.lat <= 90.0:
            raise GeometryError(f"latitude {self.lat} outside [-90, 90]")
        if not -180.0 <= self.lon <= 180.0:
            raise GeometryError(f"longitude {self.lon} outside [-180, 180]")


class Polyline:
    """An ordered sequence of at least two distinct points.

    Consecutive duplicate points are dropped on construction; if fewer than
    two points remain the polyline is degenerate and rejected.
    """

    __slots__ = ("points",)

    def __init__(self, points):
        deduped: list[GeoPoint] = []
        for p in points:
            if not isinstance(p, GeoPoint):
                p = GeoPoint(p[0], p[1])
            if not deduped or p != deduped[-1]:
                deduped.append(p)
        if len(deduped) < 2:
            raise GeometryError("polyline needs at least 2 distinct points")
        self.points = tuple(deduped)

    def __len__(self):
        return len(self.points)

    def __iter__(self):
        return iter(self.points)

    def __getitem__(self, i):
        return self.points[i]

    def __eq__(self, other):
        return isinstance(other, Polyline) and self.points == other.points

    def __hash__(self):
        return hash(self.points)

    def __repr__(self):
        return f"Polyline({len(self.points)} points)"

    def legs(self):
        """Consecutive point pairs."""
        return zip(self.points, self.points[1:])


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance in meters (R = 6 371 000 m)."""
    phi1 = math.radians(a.lat)
    phi2 = math.radians(b.lat)
    dphi = phi2 - phi1
    dlam = math.radians(b.lon - a.lon)
    h = math.sin(dphi / 2.0) ** 2 + math.cos(phi1) * math.cos(phi2) * math.sin(dlam / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def polyline_length_m(pl: Polyline) -> float:
    """Sum of haversine distances over consecutive point pairs."""
    return sum(haversine_m(a, b) for a, b in pl.legs())


def _point_segment_dist_deg(px, py, ax, ay, bx, by) -> float:
    """Distance from (px,py) to segment (a,b) in the raw coordinate plane."""
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = ((px - ax) * dx + (py - ay) * dy) / denom
    t = min(1.0, max(0.0, t))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def point_on_ring(p: GeoPoint, ring, eps_deg: float = BOUNDARY_EPS_DEG) -> bool:
    """True if p lies within eps_deg of any ring edge (lon/lat plane)."""
    n = len(ring)
    for i in range(n):
        a = ring[i]
        b = ring[(i + 1) % n]
        if _point_segment_dist_deg(p.lon, p.lat, a.lon, a.lat, b.lon, b.lat) <= eps_deg:
            return True
    return False


def point_in_ring(p: GeoPoint, ring) -> bool:
    """Even-odd (ray casting) containment in the lon/lat plane.

    The ring is a closed simple polygon given as an ordered vertex list with
    implicit closure (first vertex is not repeated). Boundary points count as
    inside, which keeps route segmentation free of zero-measure gaps.
    """
    n = len(ring)
    if n < 3:
        raise GeometryError(f"ring needs at least 3 vertices, got {n}")
    if point_on_ring(p, ring):
        return True
    # Cast a ray in +lon direction, count crossings.
    inside = False
    x, y = p.lon, p.lat
    for i in range(n):
        a = ring[i]
        b = ring[(i + 1) % n]
        ay, by = a.lat, b.lat
        if (ay > y) != (by > y):
            x_cross = a.lon + (y - ay) * (b.lon - a.lon) / (by - ay)
            if x < x_cross:
                inside = not inside
    return inside
