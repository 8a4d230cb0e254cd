"""Deterministic generator of non-overlapping rectangular pollution zones.

Rectangles are placed in disjoint slots of a virtual grid, so the
non-overlap invariant holds by construction for any seed.
"""

from __future__ import annotations

import math
import random

from tollgrid.geo.primitives import GeoPoint
from tollgrid.geo.zones import PollutionZone


def random_rect_zones(
    count: int,
    seed: int,
    origin_lat: float = 0.0,
    origin_lon: float = 0.0,
    extent_deg: float = 0.1,
) -> list[PollutionZone]:
    """Generate `count` non-overlapping axis-aligned rectangular zones.

    Zones are scattered over a square of side `extent_deg` anchored at
    (origin_lat, origin_lon), with levels cycling through 1..5 plus a random
    shuffle, all driven by `seed`.
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    rng = random.Random(seed)
    k = math.ceil(math.sqrt(count))
    cell = extent_deg / k
    slots = [(i, j) for i in range(k) for j in range(k)]
    rng.shuffle(slots)
    zones = []
    for n, (i, j) in enumerate(slots[:count]):
        margin = cell * rng.uniform(0.05, 0.2)
        w = cell - 2 * margin
        lon0 = origin_lon + i * cell + margin + rng.uniform(0, 0.1) * w
        lat0 = origin_lat + j * cell + margin + rng.uniform(0, 0.1) * w
        lon1 = lon0 + rng.uniform(0.4, 0.85) * w
        lat1 = lat0 + rng.uniform(0.4, 0.85) * w
        ring = [
            GeoPoint(lat0, lon0),
            GeoPoint(lat0, lon1),
            GeoPoint(lat1, lon1),
            GeoPoint(lat1, lon0),
        ]
        zones.append(PollutionZone(f"z{n:03d}", rng.randint(1, 5), ring))
    return zones


def zones_to_records(zones: list[PollutionZone]) -> list[dict]:
    """Serialize zones to the zone-file record format."""
    return [
        {
            "zone_id": z.zone_id,
            "level": z.level,
            "ring": [[p.lon, p.lat] for p in z.ring],
        }
        for z in zones
    ]
