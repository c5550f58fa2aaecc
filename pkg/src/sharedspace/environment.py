"""Static environment: obstacle polygons, visibility graph, A* path planning."""
from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field

import numpy as np

from . import geometry as geo


class InvalidPolygon(ValueError):
    def __init__(self, obstacle_id, reason: str):
        super().__init__(f"obstacle {obstacle_id!r}: {reason}")
        self.obstacle_id = obstacle_id
        self.reason = reason


class Unreachable(RuntimeError):
    """No collision-free path exists between the requested points."""


@dataclass(frozen=True)
class ObstaclePolygon:
    id: str
    vertices: np.ndarray = field(repr=False)

    def __init__(self, id, vertices):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise InvalidPolygon(id, "vertices must be an (n, 2) array")
        if len(v) >= 2 and np.allclose(v[0], v[-1]):
            v = v[:-1]
        if len(v) < 3:
            raise InvalidPolygon(id, f"needs at least 3 vertices, got {len(v)}")
        if not np.all(np.isfinite(v)):
            raise InvalidPolygon(id, "non-finite vertex coordinates")
        area = geo.signed_area(v)
        if abs(area) < geo.EPS:
            raise InvalidPolygon(id, "zero area")
        if not geo.is_simple(v):
            raise InvalidPolygon(id, "self-intersecting outline")
        if area < 0:
            v = v[::-1].copy()  # store counter-clockwise
        v.setflags(write=False)
        object.__setattr__(self, "id", id)
        object.__setattr__(self, "vertices", v)

    def __eq__(self, other):
        if not isinstance(other, ObstaclePolygon):
            return NotImplemented
        return self.id == other.id and np.array_equal(self.vertices, other.vertices)

    def __hash__(self):
        return hash((self.id, self.vertices.tobytes()))

    def contains(self, p) -> bool:
        """Strict interior membership; boundary points are outside."""
        return geo.point_strictly_inside(p, self.vertices)

    def distance(self, p) -> float:
        return geo.point_polygon_distance(np.asarray(p, float), self.vertices)

    def nearest_point(self, p) -> tuple[np.ndarray, float]:
        return geo.nearest_point_on_polygon(np.asarray(p, float), self.vertices)


@dataclass(frozen=True)
class VisibilityGraph:
    nodes: np.ndarray  # (n, 2)
    edges: tuple[tuple[int, int, float], ...]
    obstacles: tuple[ObstaclePolygon, ...] = ()
    # node -> (obstacle index, vertex index)
    sources: tuple[tuple[int, int], ...] = ()

    def adjacency(self) -> list[list[tuple[int, float]]]:
        adj: list[list[tuple[int, float]]] = [[] for _ in range(len(self.nodes))]
        for i, j, w in self.edges:
            adj[i].append((j, w))
            adj[j].append((i, w))
        return adj


@dataclass(frozen=True)
class PlannedPath:
    waypoints: np.ndarray  # (k, 2)

    @property
    def total_length(self) -> float:
        if len(self.waypoints) < 2:
            return 0.0
        d = np.diff(self.waypoints, axis=0)
        return float(np.sum(np.hypot(d[:, 0], d[:, 1])))

    def __len__(self):
        return len(self.waypoints)


def _edge_arrays(obstacles) -> tuple[np.ndarray, np.ndarray]:
    if not obstacles:
        return np.zeros((0, 2)), np.zeros((0, 2))
    a = np.concatenate([o.vertices for o in obstacles])
    b = np.concatenate([np.roll(o.vertices, -1, axis=0) for o in obstacles])
    return a, b


def segment_visible(p, q, obstacles, edges=None) -> bool:
    """True when the open segment pq neither crosses an obstacle outline nor runs
    through an obstacle interior. Grazing contact with vertices or running along an
    edge counts as visible."""
    p = np.asarray(p, float)
    q = np.asarray(q, float)
    if not obstacles:
        return True
    a, b = edges if edges is not None else _edge_arrays(obstacles)
    d = q - p
    # proper crossings, vectorised over all outline edges
    def orient(u0, u1, w):
        return (u1[..., 0] - u0[..., 0]) * (w[..., 1] - u0[..., 1]) - (u1[..., 1] - u0[..., 1]) * (w[..., 0] - u0[..., 0])

    o1 = np.sign(np.where(np.abs(o := orient(p, q, a)) > geo.EPS, o, 0.0))
    o2 = np.sign(np.where(np.abs(o := orient(p, q, b)) > geo.EPS, o, 0.0))
    o3 = np.sign(np.where(np.abs(o := orient(a, b, p)) > geo.EPS, o, 0.0))
    o4 = np.sign(np.where(np.abs(o := orient(a, b, q)) > geo.EPS, o, 0.0))
    if np.any((o1 * o2 < 0) & (o3 * o4 < 0)):
        return False
    # split at every outline vertex touched by the segment, test sub-interval midpoints
    dd = float(np.dot(d, d))
    if dd < geo.EPS * geo.EPS:
        return not any(o.contains(p) for o in obstacles)
    t = np.einsum("ij,j->i", a - p, d) / dd
    foot = p + np.clip(t, 0, 1)[:, None] * d
    touch = np.hypot(*(foot - a).T) <= 1e-9
    ts = np.unique(np.concatenate([[0.0, 1.0], np.clip(t[touch], 0.0, 1.0)]))
    mids = 0.5 * (ts[:-1] + ts[1:])
    for m in mids:
        x = p + m * d
        for o in obstacles:
            if o.contains(x):
                return False
    return True


def build_visibility_graph(obstacles) -> VisibilityGraph:
    obstacles = tuple(obstacles)
    validate_obstacles(obstacles)
    nodes = []
    sources = []
    for k, o in enumerate(obstacles):
        for i, v in enumerate(o.vertices):
            nodes.append(v)
            sources.append((k, i))
    if not nodes:
        return VisibilityGraph(np.zeros((0, 2)), (), obstacles, ())
    nodes_arr = np.array(nodes, dtype=float)
    edges_ab = _edge_arrays(obstacles)
    edges = []
    n = len(nodes_arr)
    for i in range(n):
        for j in range(i + 1, n):
            if _adjacent(sources[i], sources[j], obstacles) or segment_visible(
                nodes_arr[i], nodes_arr[j], obstacles, edges_ab
            ):
                w = float(math.dist(nodes_arr[i], nodes_arr[j]))
                if w > 0:
                    edges.append((i, j, w))
    return VisibilityGraph(nodes_arr, tuple(edges), obstacles, tuple(sources))


def _adjacent(s1, s2, obstacles) -> bool:
    if s1[0] != s2[0]:
        return False
    n = len(obstacles[s1[0]].vertices)
    return (s1[1] - s2[1]) % n in (1, n - 1)


def validate_obstacles(obstacles) -> None:
    """Reject obstacles that overlap each other."""
    for i, oi in enumerate(obstacles):
        for oj in obstacles[i + 1:]:
            a1, b1 = geo.polygon_edges(oi.vertices)
            a2, b2 = geo.polygon_edges(oj.vertices)
            for p, q in zip(a1, b1):
                for r, s in zip(a2, b2):
                    if geo.segments_cross_properly(p, q, r, s):
                        raise InvalidPolygon(oj.id, f"overlaps obstacle {oi.id!r}")
            if any(oj.contains(v) for v in oi.vertices) or any(oi.contains(v) for v in oj.vertices):
                raise InvalidPolygon(oj.id, f"overlaps obstacle {oi.id!r}")


def _augment(graph: VisibilityGraph, points, obstacles):
    """Adjacency of ``graph`` plus the extra query points; the graph itself is untouched."""
    adj = graph.adjacency()
    nodes = list(graph.nodes)
    edges_ab = _edge_arrays(obstacles)
    for p in points:
        idx = len(nodes)
        adj.append([])
        for j, q in enumerate(nodes):
            if segment_visible(p, q, obstacles, edges_ab):
                w = float(math.dist(p, q))
                adj[idx].append((j, w))
                adj[j].append((idx, w))
        nodes.append(np.asarray(p, float))
    return np.array(nodes), adj


def plan_path(graph: VisibilityGraph, origin, destination, obstacles=None) -> PlannedPath:
    """Shortest obstacle-free polyline from ``origin`` to ``destination`` via A*."""
    obstacles = tuple(graph.obstacles if obstacles is None else obstacles)
    origin = geo.as_point(origin)
    destination = geo.as_point(destination)
    for o in obstacles:
        if o.contains(origin):
            raise Unreachable(f"origin {origin.tolist()} lies inside obstacle {o.id!r}")
        if o.contains(destination):
            raise Unreachable(f"destination {destination.tolist()} lies inside obstacle {o.id!r}")
    nodes, adj = _augment(graph, [origin, destination], obstacles)
    start, goal = len(nodes) - 2, len(nodes) - 1
    prev = astar(nodes, adj, start, goal)
    if prev is None:
        raise Unreachable(f"no path from {origin.tolist()} to {destination.tolist()}")
    order = [goal]
    while order[-1] != start:
        order.append(prev[order[-1]])
    return PlannedPath(nodes[order[::-1]].copy())


def astar(nodes: np.ndarray, adj, start: int, goal: int):
    """A* with straight-line heuristic. Ties on f go to lower g, then lower node index.

    Returns the predecessor map, or None if ``goal`` is unreachable.
    """
    gx, gy = nodes[goal]

    def h(i):
        return math.hypot(nodes[i][0] - gx, nodes[i][1] - gy)

    g = {start: 0.0}
    prev: dict[int, int] = {}
    heap = [(h(start), 0.0, start)]
    closed = set()
    while heap:
        f, gc, u = heapq.heappop(heap)
        if u in closed:
            continue
        if u == goal:
            return prev
        closed.add(u)
        for v, w in adj[u]:
            if v in closed:
                continue
            ng = gc + w
            if ng < g.get(v, math.inf):
                g[v] = ng
                prev[v] = u
                heapq.heappush(heap, (ng + h(v), ng, v))
    return None


def _source_vertex(p, obstacles):
    for k, o in enumerate(obstacles):
        hits = np.nonzero(np.hypot(*(o.vertices - p).T) <= 1e-9)[0]
        if len(hits):
            return k, int(hits[0])
    return None


def exterior_bisector(vertices: np.ndarray, i: int) -> np.ndarray:
    """Unit direction pointing out of a counter-clockwise polygon at vertex ``i``."""
    n = len(vertices)
    v = vertices[i]
    prev_v, next_v = vertices[(i - 1) % n], vertices[(i + 1) % n]
    u1 = geo.unit(prev_v - v)
    u2 = geo.unit(next_v - v)
    b = u1 + u2
    convex = geo.cross(v - prev_v, next_v - v) > 0
    if np.hypot(*b) < 1e-12:
        # straight vertex: outward normal of a CCW outline is the right-hand normal
        e = geo.unit(next_v - prev_v)
        return np.array([e[1], -e[0]])
    b = geo.unit(b)
    return -b if convex else b


def offset_inner_vertices(path: PlannedPath, obstacles, clearance: float) -> PlannedPath:
    """Push inner waypoints away from the obstacle corner they were taken from.

    Each inner waypoint moves ``clearance`` along its corner's exterior bisector; if that
    breaks line of sight to a neighbour the offset is bisected down until it does not.
    """
    if clearance < 0:
        raise ValueError("clearance must be non-negative")
    obstacles = tuple(obstacles)
    wps = np.array(path.waypoints, dtype=float)
    if clearance == 0 or len(wps) <= 2:
        return PlannedPath(wps)
    edges_ab = _edge_arrays(obstacles)
    for i in range(1, len(wps) - 1):
        src = _source_vertex(wps[i], obstacles)
        if src is None:
            continue
        k, vi = src
        direction = exterior_bisector(obstacles[k].vertices, vi)
        corner = wps[i].copy()

        def ok(s):
            c = corner + s * direction
            if any(o.contains(c) for o in obstacles):
                return False
            return segment_visible(wps[i - 1], c, obstacles, edges_ab) and segment_visible(
                c, wps[i + 1], obstacles, edges_ab
            )

        if ok(clearance):
            wps[i] = corner + clearance * direction
            continue
        lo, hi = 0.0, clearance
        for _ in range(40):
            mid = 0.5 * (lo + hi)
            if ok(mid):
                lo = mid
            else:
                hi = mid
        wps[i] = corner + lo * direction
    return PlannedPath(wps)
