"""GPS map matching: nearest-edge snapping plus shortest-path gap filling.

Point-to-segment distances use a latitude-scaled planar projection
(longitude compressed by cos(lat)), adequate below city scale. Ties between
equally distant edges break toward the lowest edge_id so results are
deterministic and the argmin property is assertable.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass

from tollgrid.geo.primitives import GeoPoint, Polyline, haversine_m
from tollgrid.roadnet.network import RoadNetwork


class MatchingError(Exception):
    """Consecutive snapped points cannot be connected on the network."""

    def __init__(self, msg: str, gap_indices: tuple[int, int] | None = None):
        super().__init__(msg)
        self.gap_indices = gap_indices


@dataclass(frozen=True)
class MatchedPoint:
    edge_id: str
    t: float
    point: GeoPoint
    deviation_m: float


def _project_t(p: GeoPoint, a: GeoPoint, b: GeoPoint, lon_scale: float) -> tuple[float, float]:
    """Clamped projection parameter and planar-degree distance to segment ab."""
    ax, ay = a.lon * lon_scale, a.lat
    bx, by = b.lon * lon_scale, b.lat
    px, py = p.lon * lon_scale, p.lat
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    t = 0.0 if denom == 0.0 else min(1.0, max(0.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return t, math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def _lerp(a: GeoPoint, b: GeoPoint, t: float) -> GeoPoint:
    if t <= 0.0:
        return a
    if t >= 1.0:
        return b
    return GeoPoint(a.lat + t * (b.lat - a.lat), a.lon + t * (b.lon - a.lon))


def nearest_edge(net: RoadNetwork, p: GeoPoint) -> MatchedPoint:
    """The edge minimizing point-to-segment distance, lowest edge_id on ties."""
    if not net.edges:
        raise MatchingError("network has no edges")
    lon_scale = math.cos(math.radians(p.lat))
    best_eid = None
    best_t = 0.0
    best_d = math.inf
    for eid, e in net.edges.items():  # edges dict is sorted by edge_id
        a, b = net.nodes[e.from_node], net.nodes[e.to_node]
        t, d = _project_t(p, a, b, lon_scale)
        if d < best_d:
            best_eid, best_t, best_d = eid, t, d
    if best_d < 1e-13:
        # Already on the edge to within float noise: snapping must be
        # idempotent, so keep the point's exact coordinates.
        return MatchedPoint(best_eid, best_t, p, 0.0)
    a, b = net.edge_endpoints(best_eid)
    point = _lerp(a, b, best_t)
    return MatchedPoint(best_eid, best_t, point, haversine_m(p, point))


def _shortest_node_path(
    net: RoadNetwork, snap_a: MatchedPoint, snap_b: MatchedPoint
) -> list[str] | None:
    """Edge-length-weighted Dijkstra from a point on one edge to a point on
    another, returning the intermediate node ids (may be a single node)."""
    ea, eb = net.edges[snap_a.edge_id], net.edges[snap_b.edge_id]
    dist: dict[str, float] = {}
    prev: dict[str, str | None] = {}
    heap: list[tuple[float, str]] = []
    for node, d0 in ((ea.from_node, snap_a.t * ea.length_m), (ea.to_node, (1.0 - snap_a.t) * ea.length_m)):
        if d0 < dist.get(node, math.inf):
            dist[node] = d0
            prev[node] = None
            heapq.heappush(heap, (d0, node))
    exit_cost = {eb.from_node: snap_b.t * eb.length_m, eb.to_node: (1.0 - snap_b.t) * eb.length_m}
    settled: set[str] = set()
    while heap:
        d, nid = heapq.heappop(heap)
        if nid in settled:
            continue
        settled.add(nid)
        if exit_cost.keys() <= settled:
            break
        for eid in net.adjacency[nid]:
            e = net.edges[eid]
            nxt = e.to_node if e.from_node == nid else e.from_node
            nd = d + e.length_m
            if nd < dist.get(nxt, math.inf):
                dist[nxt] = nd
                prev[nxt] = nid
                heapq.heappush(heap, (nd, nxt))
    best_end = None
    best_total = math.inf
    for node, cost in sorted(exit_cost.items()):
        if node in dist and dist[node] + cost < best_total:
            best_total = dist[node] + cost
            best_end = node
    if best_end is None:
        return None
    path = [best_end]
    while prev[path[-1]] is not None:
        path.append(prev[path[-1]])
    path.reverse()
    return path


def match_trace(net: RoadNetwork, raw: list[GeoPoint]) -> Polyline:
    """Snap raw GPS points to the network and connect them along it.

    Consecutive snaps on one edge connect directly; snaps on different edges
    connect through the shortest node path. The output polyline lies on the
    network: every vertex is on some edge.
    """
    if len(raw) < 2:
        raise MatchingError(f"need at least 2 raw points, got {len(raw)}")
    snaps = [nearest_edge(net, p) for p in raw]
    points: list[GeoPoint] = [snaps[0].point]
    for i, (sa, sb) in enumerate(zip(snaps, snaps[1:])):
        if sa.edge_id == sb.edge_id:
            points.append(sb.point)
            continue
        node_path = _shortest_node_path(net, sa, sb)
        if node_path is None:
            raise MatchingError(
                f"no path between snapped points {i} and {i + 1}", gap_indices=(i, i + 1)
            )
        points.extend(net.nodes[nid] for nid in node_path)
        points.append(sb.point)
    return Polyline(points)
