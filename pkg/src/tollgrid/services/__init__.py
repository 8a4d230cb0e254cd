"""Pipeline services: map matcher, pollution matcher, toll calculator."""

from tollgrid.services.messages import (
    LocationUpdate,
    MessageError,
    RateTable,
    RouteMsg,
    SegmentMsg,
    TollMsg,
    decode_json,
    encode_json,
    eur_str,
    parse_eur,
    point_from_json,
    point_to_json,
    polyline_from_json,
    polyline_to_json,
    segment_from_json,
    segment_to_json,
)
from tollgrid.services.runner import (
    REGISTRY_TOPIC,
    SERVICE_KINDS,
    Service,
    connect_with_retry,
    run_service,
)
from tollgrid.services.steps import MapMatcher, PollutionMatcher, TollCalculator, route_length_m

__all__ = [
    "REGISTRY_TOPIC",
    "SERVICE_KINDS",
    "LocationUpdate",
    "MapMatcher",
    "MessageError",
    "PollutionMatcher",
    "RateTable",
    "RouteMsg",
    "SegmentMsg",
    "Service",
    "TollCalculator",
    "TollMsg",
    "connect_with_retry",
    "decode_json",
    "encode_json",
    "eur_str",
    "parse_eur",
    "point_from_json",
    "point_to_json",
    "polyline_from_json",
    "polyline_to_json",
    "route_length_m",
    "run_service",
    "segment_from_json",
    "segment_to_json",
]
