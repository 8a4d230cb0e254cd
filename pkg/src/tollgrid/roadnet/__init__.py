"""Road network model and GPS map matching."""

from tollgrid.roadnet.network import (
    Edge,
    NetworkLoadError,
    RoadNetwork,
    grid_network_records,
    load_network,
    network_from_records,
)
from tollgrid.roadnet.matching import MatchedPoint, MatchingError, match_trace, nearest_edge

__all__ = [
    "Edge",
    "MatchedPoint",
    "MatchingError",
    "NetworkLoadError",
    "RoadNetwork",
    "grid_network_records",
    "load_network",
    "match_trace",
    "nearest_edge",
    "network_from_records",
]
