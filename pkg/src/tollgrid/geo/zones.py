"""Pollution zones: leveled polygons, overlap validation, and a grid index.

The zone set is loaded once at service startup from a JSON file and must
form a partition-like layout: zone interiors may not overlap (shared
boundaries are fine). The grid index replaces a spatial database at desk
scale; it only has to be superset-correct, never to prune a true candidate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

from tollgrid.geo.primitives import GeoPoint, GeometryError, point_in_ring, point_on_ring

MIN_LEVEL = 1
MAX_LEVEL = 5
DEFAULT_CELL_SIZE_DEG = 0.01


class ZoneDataError(ValueError):
    """Zone file rejected: bad record, malformed ring, or overlapping zones."""


def _orient(ax, ay, bx, by, cx, cy) -> float:
    return (bx - ax) * (cy - ay) - (by - ay) * (cx - ax)


def _proper_cross(a, b, c, d) -> bool:
    """True if segments ab and cd cross at a single interior point of both."""
    d1 = _orient(a.lon, a.lat, b.lon, b.lat, c.lon, c.lat)
    d2 = _orient(a.lon, a.lat, b.lon, b.lat, d.lon, d.lat)
    d3 = _orient(c.lon, c.lat, d.lon, d.lat, a.lon, a.lat)
    d4 = _orient(c.lon, c.lat, d.lon, d.lat, b.lon, b.lat)
    return d1 * d2 < 0 and d3 * d4 < 0


class PollutionZone:
    """A simple polygon with an integer pollution level in 1..5.

    The ring is stored open (first vertex not repeated); closure is implicit.
    """

    __slots__ = ("zone_id", "level", "ring", "bbox")

    def __init__(self, zone_id: str, level: int, ring):
        if not zone_id:
            raise ZoneDataError("zone_id must be non-empty")
        if not isinstance(level, int) or not MIN_LEVEL <= level <= MAX_LEVEL:
            raise ZoneDataError(f"zone {zone_id!r}: level {level!r} outside {MIN_LEVEL}..{MAX_LEVEL}")
        pts = [p if isinstance(p, GeoPoint) else GeoPoint(p[0], p[1]) for p in ring]
        if len(pts) >= 2 and pts[0] == pts[-1]:
            pts = pts[:-1]
        if len(pts) < 3:
            raise ZoneDataError(f"zone {zone_id!r}: ring needs at least 3 vertices")
        if len(set(pts)) != len(pts):
            raise ZoneDataError(f"zone {zone_id!r}: duplicate ring vertices")
        _check_simple(zone_id, pts)
        self.zone_id = zone_id
        self.level = level
        self.ring = tuple(pts)
        lats = [p.lat for p in pts]
        lons = [p.lon for p in pts]
        self.bbox = (min(lons), min(lats), max(lons), max(lats))

    def contains(self, p: GeoPoint) -> bool:
        min_lon, min_lat, max_lon, max_lat = self.bbox
        if not (min_lon <= p.lon <= max_lon and min_lat <= p.lat <= max_lat):
            return False
        return point_in_ring(p, self.ring)

    def __repr__(self):
        return f"PollutionZone({self.zone_id!r}, level={self.level}, {len(self.ring)} vertices)"


def _check_simple(zone_id: str, pts) -> None:
    """Reject rings whose non-adjacent edges properly cross."""
    n = len(pts)
    for i in range(n):
        a, b = pts[i], pts[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i or (j + 1) % n == i or (i + 1) % n == j:
                continue
            c, d = pts[j], pts[(j + 1) % n]
            if _proper_cross(a, b, c, d):
                raise ZoneDataError(f"zone {zone_id!r}: ring is self-intersecting (edges {i} and {j})")


def _interior_point(zone: PollutionZone) -> GeoPoint:
    """A point strictly inside the ring, found by a mid-latitude scanline."""
    lats = sorted({p.lat for p in zone.ring})
    for k in range(len(lats) - 1):
        y = (lats[k] + lats[k + 1]) / 2.0
        xs = []
        n = len(zone.ring)
        for i in range(n):
            a, b = zone.ring[i], zone.ring[(i + 1) % n]
            if (a.lat > y) != (b.lat > y):
                xs.append(a.lon + (y - a.lat) * (b.lon - a.lon) / (b.lat - a.lat))
        xs.sort()
        for x1, x2 in zip(xs[0::2], xs[1::2]):
            if x2 > x1:
                return GeoPoint(y, (x1 + x2) / 2.0)
    raise ZoneDataError(f"zone {zone.zone_id!r}: degenerate ring, no interior found")


def validate_zones(zones: list[PollutionZone]) -> None:
    """Reject duplicate ids and zones with overlapping interiors.

    Pairwise check: a proper edge crossing, a vertex strictly inside the
    other zone, or an interior point contained by the other zone all mean
    the interiors overlap. Zones that merely share a boundary pass.
    """
    seen: set[str] = set()
    for z in zones:
        if z.zone_id in seen:
            raise ZoneDataError(f"duplicate zone_id {z.zone_id!r}")
        seen.add(z.zone_id)

    for i in range(len(zones)):
        for j in range(i + 1, len(zones)):
            za, zb = zones[i], zones[j]
            if not _bbox_overlap(za.bbox, zb.bbox):
                continue
            if _interiors_overlap(za, zb):
                raise ZoneDataError(
                    f"zones {za.zone_id!r} and {zb.zone_id!r} have overlapping interiors"
                )


def _bbox_overlap(a, b) -> bool:
    return a[0] <= b[2] and b[0] <= a[2] and a[1] <= b[3] and b[1] <= a[3]


def _strictly_inside(p: GeoPoint, zone: PollutionZone) -> bool:
    return zone.contains(p) and not point_on_ring(p, zone.ring)


def _interiors_overlap(za: PollutionZone, zb: PollutionZone) -> bool:
    na, nb = len(za.ring), len(zb.ring)
    for i in range(na):
        a1, a2 = za.ring[i], za.ring[(i + 1) % na]
        for j in range(nb):
            if _proper_cross(a1, a2, zb.ring[j], zb.ring[(j + 1) % nb]):
                return True
    if any(_strictly_inside(p, zb) for p in za.ring):
        return True
    if any(_strictly_inside(p, za) for p in zb.ring):
        return True
    # Containment without vertex capture (identical or nested rings).
    return _strictly_inside(_interior_point(za), zb) or _strictly_inside(_interior_point(zb), za)


def load_zones(path) -> list[PollutionZone]:
    """Load and validate a zone file: JSON array of {zone_id, level, ring}.

    Ring vertices are [lon, lat] pairs.
    """
    with open(path, encoding="utf-8") as f:
        try:
            raw = json.load(f)
        except json.JSONDecodeError as e:
            raise ZoneDataError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(raw, list):
        raise ZoneDataError(f"{path}: expected a JSON array of zones")
    zones = []
    for idx, rec in enumerate(raw):
        try:
            ring = [GeoPoint(lat, lon) for lon, lat in rec["ring"]]
            zones.append(PollutionZone(rec["zone_id"], rec["level"], ring))
        except (KeyError, TypeError, ValueError) as e:
            zid = rec.get("zone_id", f"#{idx}") if isinstance(rec, dict) else f"#{idx}"
            raise ZoneDataError(f"{path}: zone {zid!r}: {e}") from e
    validate_zones(zones)
    return zones


@dataclass
class ZoneIndex:
    """Uniform grid over zone bounding boxes.

    Every zone is registered in every cell its bounding box overlaps, so a
    candidate query can return false positives but never misses a zone whose
    bbox intersects the query bbox.
    """

    cell_size_deg: float = DEFAULT_CELL_SIZE_DEG
    cells: dict = field(default_factory=dict)
    zones_by_id: dict = field(default_factory=dict)

    def _cell_range(self, lo: float, hi: float):
        return range(math.floor(lo / self.cell_size_deg), math.floor(hi / self.cell_size_deg) + 1)

    def add(self, zone: PollutionZone) -> None:
        self.zones_by_id[zone.zone_id] = zone
        min_lon, min_lat, max_lon, max_lat = zone.bbox
        for ix in self._cell_range(min_lon, max_lon):
            for iy in self._cell_range(min_lat, max_lat):
                self.cells.setdefault((ix, iy), []).append(zone.zone_id)

    def candidates(self, a: GeoPoint, b: GeoPoint) -> list[PollutionZone]:
        """Zones whose registered cells overlap the leg's bounding box.

        Sorted by zone_id for deterministic downstream classification.
        """
        found: set[str] = set()
        for ix in self._cell_range(min(a.lon, b.lon), max(a.lon, b.lon)):
            for iy in self._cell_range(min(a.lat, b.lat), max(a.lat, b.lat)):
                found.update(self.cells.get((ix, iy), ()))
        return [self.zones_by_id[zid] for zid in sorted(found)]


def build_index(zones: list[PollutionZone], cell_size_deg: float = DEFAULT_CELL_SIZE_DEG) -> ZoneIndex:
    if cell_size_deg <= 0:
        raise GeometryError(f"cell_size_deg must be positive, got {cell_size_deg}")
    index = ZoneIndex(cell_size_deg=cell_size_deg)
    for z in zones:
        index.add(z)
    return index
