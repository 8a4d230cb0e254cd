"""Route segmentation: hand-solved cuts, conservation, sampling oracle."""

import math
import random

import pytest

from tollgrid.geo import (
    GeoPoint,
    PollutionZone,
    Polyline,
    build_index,
    polyline_length_m,
    split_by_zones,
)
from tollgrid.geo.zonegen import random_rect_zones

ONE_MILLIDEG_M = 6_371_000 * 0.001 * math.pi / 180.0


def rect(zone_id, level, lon0, lat0, lon1, lat1):
    return PollutionZone(
        zone_id,
        level,
        [GeoPoint(lat0, lon0), GeoPoint(lat0, lon1), GeoPoint(lat1, lon1), GeoPoint(lat1, lon0)],
    )


def split(pl, zones, cell=0.01):
    return split_by_zones(pl, zones, build_index(zones, cell_size_deg=cell))


def test_polyline_inside_single_zone():
    zones = [rect("a", 3, -0.01, -0.01, 0.01, 0.01)]
    pl = Polyline([GeoPoint(0, -0.005), GeoPoint(0, 0.005)])
    segs = split(pl, zones)
    assert len(segs) == 1
    assert segs[0].level == 3
    assert segs[0].length_m == polyline_length_m(pl)


def test_polyline_outside_all_zones():
    zones = [rect("a", 3, 10, 10, 11, 11)]
    pl = Polyline([GeoPoint(0, 0), GeoPoint(0, 0.01)])
    segs = split(pl, zones)
    assert len(segs) == 1
    assert segs[0].level == 0


def test_boundary_crossing_hand_solved():
    """Leg (0,0)->(0,0.002) exits a zone at lon 0.001: two equal halves.

    Each half spans 0.001 deg of longitude on the equator, i.e. about
    111.19 m (R * 0.001 * pi/180).
    """
    zones = [rect("a", 2, 0.0, -0.001, 0.001, 0.001)]
    pl = Polyline([GeoPoint(0, 0), GeoPoint(0, 0.002)])
    segs = split(pl, zones)
    assert [s.level for s in segs] == [2, 0]
    assert segs[0].length_m == pytest.approx(ONE_MILLIDEG_M, abs=0.01)
    assert segs[1].length_m == pytest.approx(segs[0].length_m, rel=1e-6)
    total = sum(s.length_m for s in segs)
    assert total == pytest.approx(polyline_length_m(pl), rel=1e-6)
    # The cut point is the zone boundary.
    assert segs[0].polyline[-1] == GeoPoint(0, 0.001)
    assert segs[1].polyline[0] == GeoPoint(0, 0.001)


def test_multi_zone_crossing_order_and_merging():
    zones = [
        rect("a", 2, 0.001, -0.001, 0.002, 0.001),
        rect("b", 4, 0.003, -0.001, 0.004, 0.001),
    ]
    pl = Polyline([GeoPoint(0, 0), GeoPoint(0, 0.005)])
    segs = split(pl, zones)
    assert [s.level for s in segs] == [0, 2, 0, 4, 0]
    for prev, cur in zip(segs, segs[1:]):
        assert prev.level != cur.level
        assert prev.polyline[-1] == cur.polyline[0]


def random_polyline(rng, extent=0.1):
    n = rng.randint(2, 6)
    pts = []
    lat = rng.uniform(0, extent)
    lon = rng.uniform(0, extent)
    for _ in range(n):
        pts.append(GeoPoint(lat, lon))
        lat = min(extent, max(0.0, lat + rng.uniform(-0.02, 0.02)))
        lon = min(extent, max(0.0, lon + rng.uniform(-0.02, 0.02)))
    try:
        return Polyline(pts)
    except Exception:
        return random_polyline(rng, extent)


def vertices_of(segs):
    out = [segs[0].polyline[0]]
    for s in segs:
        for p in s.polyline[1:]:
            out.append(p)
    return out


def test_conservation_and_structure_random():
    """Random polylines over random zones: lengths conserve, order preserved,
    merging maximal."""
    rng = random.Random(99)
    zones = random_rect_zones(30, seed=99)
    index = build_index(zones)
    for _ in range(200):
        pl = random_polyline(rng)
        segs = split_by_zones(pl, zones, index)
        total = sum(s.length_m for s in segs)
        want = polyline_length_m(pl)
        assert abs(total - want) <= max(want, 1e-9) * 1e-6
        # Maximal merging.
        for prev, cur in zip(segs, segs[1:]):
            assert prev.level != cur.level
        # Original vertices appear in order in the concatenation.
        concat = vertices_of(segs)
        it = iter(concat)
        for v in pl:
            assert any(v == c for c in it), f"vertex {v} lost"
        # Stored length matches the segment's own polyline.
        for s in segs:
            assert abs(s.length_m - polyline_length_m(s.polyline)) <= max(s.length_m, 1e-12) * 1e-9


def test_midpoint_sampling_oracle():
    """Monte-Carlo: interior samples of each segment classify to its level."""
    rng = random.Random(5)
    zones = random_rect_zones(25, seed=5)
    index = build_index(zones)

    def classify(p):
        for z in index.candidates(p, p):
            if z.contains(p):
                return z.level
        return 0

    agree_len = 0.0
    total_len = 0.0
    for _ in range(100):
        pl = random_polyline(rng)
        for seg in split_by_zones(pl, zones, index):
            pts = seg.polyline.points
            hits = 0
            samples = 0
            for _ in range(100):
                i = rng.randrange(len(pts) - 1)
                t = rng.uniform(1e-6, 1 - 1e-6)
                a, b = pts[i], pts[i + 1]
                p = GeoPoint(a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon))
                samples += 1
                if classify(p) == seg.level:
                    hits += 1
            total_len += seg.length_m
            agree_len += seg.length_m * hits / samples
    assert agree_len / total_len >= 0.995
