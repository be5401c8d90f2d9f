"""Weather-weighted shortest paths over a geographic road graph.

Edge costs scale length by a rain multiplier (capped) plus a snow penalty
when precipitation coincides with freezing temperature. The search is
Dijkstra with deterministic ties: among equal-cost paths the lexicographically
smallest node sequence wins.
"""

from __future__ import annotations

import heapq
import json
from dataclasses import dataclass
from datetime import date
from typing import Optional

from .errors import EmptyGraph, EmptyStore, NegativePrecip, NoData, NoRoute
from .forecast import forecast_at
from .ncgrid import KIND_RAINFALL, KIND_TEMPERATURE
from .store import GeoPoint, StoreSnapshot, haversine_km


@dataclass(frozen=True)
class WeatherWeights:
    rain_penalty: float = 0.5  # cost multiplier slope per P_ref of rain
    p_ref_mm: float = 5.0
    rain_cap: float = 4.0
    snow_penalty: float = 2.0
    t_snow_c: float = 0.0

    def __post_init__(self):
        if min(self.rain_penalty, self.rain_cap, self.snow_penalty) < 0:
            raise ValueError("penalty coefficients must be non-negative")
        if not self.p_ref_mm > 0:
            raise ValueError("p_ref_mm must be positive")


@dataclass(frozen=True)
class Edge:
    a: int
    b: int
    length_km: float


class RoadGraph:
    """Undirected weighted graph; parallel edges allowed."""

    def __init__(self):
        self.nodes = {}  # id -> GeoPoint
        self._adj = {}  # id -> list of (neighbor, Edge)

    def add_node(self, node_id: int, point: GeoPoint):
        self.nodes[node_id] = point
        self._adj.setdefault(node_id, [])

    def add_edge(self, a: int, b: int, length_km: float):
        if a not in self.nodes or b not in self.nodes:
            raise KeyError(f"edge ({a}, {b}) references unknown node")
        if not (length_km > 0 and length_km != float("inf")):
            raise ValueError(f"edge length must be positive and finite, got {length_km}")
        e = Edge(a, b, float(length_km))
        self._adj[a].append((b, e))
        self._adj[b].append((a, e))

    def neighbors(self, node_id: int):
        return self._adj.get(node_id, [])

    @property
    def edges(self):
        seen = []
        for a, pairs in sorted(self._adj.items()):
            for b, e in pairs:
                if e.a == a:  # emit each undirected edge once
                    seen.append(e)
        return seen

    def __len__(self):
        return len(self.nodes)


def snap_to_node(graph: RoadGraph, point: GeoPoint) -> int:
    """Closest node by haversine; ties go to the lower node id."""
    if not graph.nodes:
        raise EmptyGraph("graph has no nodes")
    best_id, best_d = None, float("inf")
    for node_id in sorted(graph.nodes):
        p = graph.nodes[node_id]
        d = float(haversine_km(point.lat, point.lon, p.lat, p.lon))
        if d < best_d:
            best_id, best_d = node_id, d
    return best_id


def edge_cost(edge: Edge, precip_mm: float, temp_c: Optional[float],
              weights: WeatherWeights) -> float:
    """length x (1 + rain_penalty * min(precip/P_ref, cap) + snow term).

    The snow term applies when there is any precipitation and the temperature
    is at or below the snow threshold; unknown temperature never counts as snow.
    """
    if precip_mm < 0:
        raise NegativePrecip(f"precipitation {precip_mm} mm")
    rain_term = weights.rain_penalty * min(precip_mm / weights.p_ref_mm, weights.rain_cap)
    snow = (precip_mm > 0 and temp_c is not None and temp_c <= weights.t_snow_c)
    return edge.length_km * (1.0 + rain_term + (weights.snow_penalty if snow else 0.0))


@dataclass(frozen=True)
class RouteLeg:
    a: int
    b: int
    length_km: float
    rain_mm: float
    cost: float


@dataclass(frozen=True)
class RouteResult:
    nodes: tuple
    legs: tuple
    total_cost: float
    total_length: float
    depart: date

    def to_dict(self, graph: RoadGraph) -> dict:
        return {
            "nodes": [{"id": n, "lat": graph.nodes[n].lat, "lon": graph.nodes[n].lon}
                      for n in self.nodes],
            "legs": [{"from": l.a, "to": l.b, "length_km": l.length_km,
                      "rain_mm": l.rain_mm, "cost": l.cost} for l in self.legs],
            "total_cost": self.total_cost,
            "total_length": self.total_length,
            "depart": self.depart.isoformat(),
        }


class _EdgeWeather:
    """Per-edge precipitation/temperature, memoized by grid cell."""

    def __init__(self, snapshot, depart, needed):
        self.snapshot = snapshot
        self.depart = depart
        self.needed = needed
        self._by_cell = {}

    def at_midpoint(self, graph, edge):
        if not self.needed:
            return 0.0, None
        pa, pb = graph.nodes[edge.a], graph.nodes[edge.b]
        mid = GeoPoint((pa.lat + pb.lat) / 2.0, (pa.lon + pb.lon) / 2.0)
        cell = self.snapshot.nearest_cell(mid)
        if cell not in self._by_cell:
            try:
                rain = max(0.0, forecast_at(self.snapshot, mid, self.depart,
                                            KIND_RAINFALL).value)
            except NoData:
                rain = 0.0
            try:
                temp = forecast_at(self.snapshot, mid, self.depart,
                                   KIND_TEMPERATURE).value
            except NoData:
                temp = None
            self._by_cell[cell] = (rain, temp)
        return self._by_cell[cell]


def best_path(graph: RoadGraph, origin: GeoPoint, dest: GeoPoint, depart: date,
              snapshot: Optional[StoreSnapshot], weights: WeatherWeights) -> RouteResult:
    """Minimum weather-weighted cost path between the snapped endpoints.

    Weather is sampled once per edge at its midpoint for the departure date;
    cells without rainfall data count as dry.
    """
    if not graph.nodes:
        raise EmptyGraph("graph has no nodes")
    weather_needed = weights.rain_penalty > 0 or weights.snow_penalty > 0
    if weather_needed and (snapshot is None or snapshot.is_empty):
        raise EmptyStore("weather-weighted routing needs a nonempty snapshot")
    weather = _EdgeWeather(snapshot, depart, weather_needed)

    start = snap_to_node(graph, origin)
    goal = snap_to_node(graph, dest)

    cost_cache = {}

    def cost_of(edge):
        if edge not in cost_cache:
            rain, temp = weather.at_midpoint(graph, edge)
            cost_cache[edge] = (edge_cost(edge, rain, temp, weights), rain)
        return cost_cache[edge]

    # heap entries (cost, path): tuple comparison makes equal-cost pops
    # resolve to the lexicographically smallest node sequence
    heap = [(0.0, (start,))]
    done = set()
    while heap:
        cost, path = heapq.heappop(heap)
        node = path[-1]
        if node in done:
            continue
        done.add(node)
        if node == goal:
            legs = []
            total_len = 0.0
            for a, b in zip(path, path[1:]):
                options = [(cost_of(e)[0], e) for nb, e in graph.neighbors(a) if nb == b]
                leg_cost, e = min(options, key=lambda t: t[0])
                legs.append(RouteLeg(a=a, b=b, length_km=e.length_km,
                                     rain_mm=cost_of(e)[1], cost=leg_cost))
                total_len += e.length_km
            return RouteResult(nodes=path, legs=tuple(legs), total_cost=cost,
                               total_length=total_len, depart=depart)
        for neighbor, e in graph.neighbors(node):
            if neighbor not in done:
                heapq.heappush(heap, (cost + cost_of(e)[0], path + (neighbor,)))
    raise NoRoute(f"no path between nodes {start} and {goal}")


def load_geojson(text: str) -> RoadGraph:
    """Build a RoadGraph from a FeatureCollection of LineString features.

    Node ids come from interning coordinates quantized to 1e-6 degrees, in
    order of first appearance. A feature's optional length_km property scales
    its haversine segment lengths to the stated total.
    """
    doc = json.loads(text)
    graph = RoadGraph()
    intern = {}

    def node_for(lon, lat):
        key = (round(lat * 1e6), round(lon * 1e6))
        if key not in intern:
            node_id = len(intern)
            intern[key] = node_id
            graph.add_node(node_id, GeoPoint(key[0] / 1e6, key[1] / 1e6))
        return intern[key]

    for feature in doc.get("features", []):
        geom = feature.get("geometry") or {}
        if geom.get("type") != "LineString":
            continue
        coords = geom.get("coordinates", [])
        if len(coords) < 2:
            continue
        ids = [node_for(lon, lat) for lon, lat in coords]
        seg_len = []
        for (lon1, lat1), (lon2, lat2) in zip(coords, coords[1:]):
            seg_len.append(float(haversine_km(lat1, lon1, lat2, lon2)))
        stated = (feature.get("properties") or {}).get("length_km")
        if stated is not None:
            total = sum(seg_len)
            if total > 0:
                seg_len = [s * float(stated) / total for s in seg_len]
            else:
                seg_len = [float(stated) / len(seg_len)] * len(seg_len)
        for (a, b), ln in zip(zip(ids, ids[1:]), seg_len):
            if a != b and ln > 0:
                graph.add_edge(a, b, ln)
    return graph
