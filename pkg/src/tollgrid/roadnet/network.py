"""Road network loading and the deterministic grid generator.

File format: JSON {"nodes": [{"id", "lat", "lon"}], "edges": [{"id", "from",
"to"}]}. Edge lengths are computed at load from node coordinates rather than
stored, so they can never drift out of sync with the geometry. All edges are
bidirectional (one-way streets are out of scope).
"""

from __future__ import annotations

import json
import logging
import random
from collections import deque
from dataclasses import dataclass

from tollgrid.geo.primitives import GeoPoint, GeometryError, haversine_m

logger = logging.getLogger(__name__)


class NetworkLoadError(ValueError):
    """Network file rejected; the message names the offending record."""


@dataclass(frozen=True)
class Edge:
    edge_id: str
    from_node: str
    to_node: str
    length_m: float


class RoadNetwork:
    """Immutable node/edge graph with per-node adjacency."""

    __slots__ = ("nodes", "edges", "adjacency")

    def __init__(self, nodes: dict[str, GeoPoint], edges: list[Edge]):
        self.nodes = dict(nodes)
        self.edges = {e.edge_id: e for e in sorted(edges, key=lambda e: e.edge_id)}
        adjacency: dict[str, list[str]] = {nid: [] for nid in self.nodes}
        for e in self.edges.values():
            adjacency[e.from_node].append(e.edge_id)
            adjacency[e.to_node].append(e.edge_id)
        self.adjacency = adjacency

    def edge_endpoints(self, edge_id: str) -> tuple[GeoPoint, GeoPoint]:
        e = self.edges[edge_id]
        return self.nodes[e.from_node], self.nodes[e.to_node]

    def is_connected(self) -> bool:
        if not self.nodes:
            return True
        seen = set()
        start = next(iter(self.nodes))
        queue = deque([start])
        seen.add(start)
        while queue:
            nid = queue.popleft()
            for eid in self.adjacency[nid]:
                e = self.edges[eid]
                for nxt in (e.from_node, e.to_node):
                    if nxt not in seen:
                        seen.add(nxt)
                        queue.append(nxt)
        return len(seen) == len(self.nodes)

    def __repr__(self):
        return f"RoadNetwork({len(self.nodes)} nodes, {len(self.edges)} edges)"


def network_from_records(records: dict) -> RoadNetwork:
    """Build and validate a network from the file-format dict."""
    nodes: dict[str, GeoPoint] = {}
    for rec in records.get("nodes", []):
        try:
            nid = str(rec["id"])
            if nid in nodes:
                raise NetworkLoadError(f"duplicate node id {nid!r}")
            nodes[nid] = GeoPoint(rec["lat"], rec["lon"])
        except (KeyError, TypeError, GeometryError) as e:
            raise NetworkLoadError(f"node record {rec!r}: {e}") from e
    edges: list[Edge] = []
    seen_edges: set[str] = set()
    for rec in records.get("edges", []):
        try:
            eid = str(rec["id"])
            frm, to = str(rec["from"]), str(rec["to"])
        except (KeyError, TypeError) as e:
            raise NetworkLoadError(f"edge record {rec!r}: {e}") from e
        if eid in seen_edges:
            raise NetworkLoadError(f"duplicate edge id {eid!r}")
        seen_edges.add(eid)
        for nid in (frm, to):
            if nid not in nodes:
                raise NetworkLoadError(f"edge {eid!r} references unknown node {nid!r}")
        if frm == to:
            raise NetworkLoadError(f"edge {eid!r} is a self-loop")
        edges.append(Edge(eid, frm, to, haversine_m(nodes[frm], nodes[to])))
    if not edges:
        raise NetworkLoadError("network has no edges")
    net = RoadNetwork(nodes, edges)
    if not net.is_connected():
        logger.warning("road network is not connected; map matching may fail across gaps")
    return net


def load_network(path) -> RoadNetwork:
    with open(path, encoding="utf-8") as f:
        try:
            records = json.load(f)
        except json.JSONDecodeError as e:
            raise NetworkLoadError(f"{path}: not valid JSON: {e}") from e
    if not isinstance(records, dict):
        raise NetworkLoadError(f"{path}: expected a JSON object with nodes/edges")
    return network_from_records(records)


def grid_network_records(
    rows: int,
    cols: int,
    spacing_deg: float = 0.001,
    origin_lat: float = 52.5,
    origin_lon: float = 13.4,
    seed: int = 0,
    jitter: float = 0.0,
) -> dict:
    """Deterministic rows x cols street grid in file-record form.

    `jitter` displaces each node by up to that fraction of the spacing,
    driven by `seed`, to break the perfect regularity when wanted.
    """
    if rows < 2 or cols < 2:
        raise ValueError("grid needs rows >= 2 and cols >= 2")
    if spacing_deg <= 0:
        raise ValueError("spacing_deg must be positive")
    rng = random.Random(seed)
    nodes = []
    for r in range(rows):
        for c in range(cols):
            dlat = rng.uniform(-jitter, jitter) * spacing_deg if jitter else 0.0
            dlon = rng.uniform(-jitter, jitter) * spacing_deg if jitter else 0.0
            nodes.append(
                {
                    "id": f"n{r}_{c}",
                    "lat": origin_lat + r * spacing_deg + dlat,
                    "lon": origin_lon + c * spacing_deg + dlon,
                }
            )
    edges = []
    for r in range(rows):
        for c in range(cols):
            if c + 1 < cols:
                edges.append({"id": f"eh{r}_{c}", "from": f"n{r}_{c}", "to": f"n{r}_{c + 1}"})
            if r + 1 < rows:
                edges.append({"id": f"ev{r}_{c}", "from": f"n{r}_{c}", "to": f"n{r + 1}_{c}"})
    return {"nodes": nodes, "edges": edges}
