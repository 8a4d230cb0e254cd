"""Geometry kernel: WGS84 primitives, pollution zones, and route segmentation."""

from tollgrid.geo.primitives import (
    GeoPoint,
    GeometryError,
    Polyline,
    haversine_m,
    point_in_ring,
    point_on_ring,
    polyline_length_m,
)
from tollgrid.geo.zones import (
    PollutionZone,
    ZoneDataError,
    ZoneIndex,
    build_index,
    load_zones,
    validate_zones,
)
from tollgrid.geo.split import LeveledSegment, split_by_zones

__all__ = [
    "GeoPoint",
    "GeometryError",
    "LeveledSegment",
    "PollutionZone",
    "Polyline",
    "ZoneDataError",
    "ZoneIndex",
    "build_index",
    "haversine_m",
    "load_zones",
    "point_in_ring",
    "point_on_ring",
    "polyline_length_m",
    "split_by_zones",
    "validate_zones",
]
