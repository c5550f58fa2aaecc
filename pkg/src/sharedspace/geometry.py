"""Planar geometry helpers: segments, polygons, distances.

Points are length-2 float arrays (or anything ``np.asarray`` accepts).
"""
from __future__ import annotations

import math

import numpy as np

EPS = 1e-9


def as_point(p) -> np.ndarray:
    a = np.asarray(p, dtype=float).reshape(2)
    if not np.all(np.isfinite(a)):
        raise ValueError(f"non-finite coordinates: {p!r}")
    return a


def cross(a, b) -> float:
    return float(a[0] * b[1] - a[1] * b[0])


def unit(v, fallback=None) -> np.ndarray:
    n = math.hypot(v[0], v[1])
    if n < EPS:
        if fallback is None:
            return np.zeros(2)
        return np.asarray(fallback, dtype=float)
    return np.asarray(v, dtype=float) / n


def angle_deg(frm, to) -> float:
    """Counter-clockwise angle from vector ``frm`` to vector ``to`` in [0, 360)."""
    a = math.degrees(math.atan2(cross(frm, to), float(np.dot(frm, to))))
    a = a % 360.0
    return 0.0 if a == 360.0 else a


def rotate(v, radians: float) -> np.ndarray:
    c, s = math.cos(radians), math.sin(radians)
    return np.array([c * v[0] - s * v[1], s * v[0] + c * v[1]])


def orientation(a, b, c) -> int:
    val = (b[0] - a[0]) * (c[1] - a[1]) - (b[1] - a[1]) * (c[0] - a[0])
    if val > EPS:
        return 1
    if val < -EPS:
        return -1
    return 0


def segments_cross_properly(p, q, a, b) -> bool:
    """True when segments pq and ab intersect at a single point interior to both."""
    o1 = orientation(p, q, a)
    o2 = orientation(p, q, b)
    o3 = orientation(a, b, p)
    o4 = orientation(a, b, q)
    return o1 * o2 < 0 and o3 * o4 < 0


def segments_intersect(p, q, a, b) -> bool:
    """Closed-segment intersection test (touching counts)."""
    o1 = orientation(p, q, a)
    o2 = orientation(p, q, b)
    o3 = orientation(a, b, p)
    o4 = orientation(a, b, q)
    if o1 * o2 < 0 and o3 * o4 < 0:
        return True

    def on_seg(u, v, w):
        return (min(u[0], v[0]) - EPS <= w[0] <= max(u[0], v[0]) + EPS
                and min(u[1], v[1]) - EPS <= w[1] <= max(u[1], v[1]) + EPS)

    return ((o1 == 0 and on_seg(p, q, a)) or (o2 == 0 and on_seg(p, q, b))
            or (o3 == 0 and on_seg(a, b, p)) or (o4 == 0 and on_seg(a, b, q)))


def closest_point_on_segment(p, a, b) -> np.ndarray:
    ab = b - a
    denom = float(np.dot(ab, ab))
    if denom < EPS * EPS:
        return np.array(a, dtype=float)
    t = min(1.0, max(0.0, float(np.dot(p - a, ab)) / denom))
    return a + t * ab


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def polygon_edges(vertices: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    return vertices, np.roll(vertices, -1, axis=0)


def is_simple(vertices: np.ndarray) -> bool:
    n = len(vertices)
    a, b = polygon_edges(vertices)
    for i in range(n):
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                # neighbours share a vertex; reject only folding back onto each other
                shared = b[i] if j == i + 1 else a[i]
                u = a[i] if j == i + 1 else b[i]
                w = b[j] if j == i + 1 else a[j]
                if orientation(u, shared, w) == 0 and np.dot(u - shared, w - shared) > 0:
                    return False
                continue
            if segments_intersect(a[i], b[i], a[j], b[j]):
                return False
    return True


def point_on_boundary(p, vertices: np.ndarray, tol: float = 1e-9) -> bool:
    return point_polygon_distance(p, vertices) <= tol


def point_in_polygon(p, vertices: np.ndarray) -> bool:
    """Even-odd test; boundary points may land either way, pair with ``point_on_boundary``."""
    x, y = float(p[0]), float(p[1])
    inside = False
    n = len(vertices)
    j = n - 1
    for i in range(n):
        xi, yi = vertices[i]
        xj, yj = vertices[j]
        if (yi > y) != (yj > y):
            xin = (xj - xi) * (y - yi) / (yj - yi) + xi
            if x < xin:
                inside = not inside
        j = i
    return inside


def point_strictly_inside(p, vertices: np.ndarray, tol: float = 1e-9) -> bool:
    return point_in_polygon(p, vertices) and not point_on_boundary(p, vertices, tol)


def nearest_point_on_polygon(p, vertices: np.ndarray) -> tuple[np.ndarray, float]:
    """Nearest boundary point of a polygon and its distance, vectorised over edges."""
    p = np.asarray(p, dtype=float)
    a, b = polygon_edges(vertices)
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    t = np.clip(np.einsum("ij,ij->i", p - a, ab) / np.where(denom > 0, denom, 1.0), 0.0, 1.0)
    proj = a + t[:, None] * ab
    d = np.hypot(proj[:, 0] - p[0], proj[:, 1] - p[1])
    k = int(np.argmin(d))
    return proj[k], float(d[k])


def point_polygon_distance(p, vertices: np.ndarray) -> float:
    return nearest_point_on_polygon(p, vertices)[1]


def points_to_edges_distance(points: np.ndarray, a: np.ndarray, b: np.ndarray):
    """Distances and nearest points from each of N points to each of E segments.

    Returns ``(dist (N, E), nearest (N, E, 2))``.
    """
    ab = b - a
    denom = np.einsum("ij,ij->i", ab, ab)
    denom = np.where(denom > 0, denom, 1.0)
    ap = points[:, None, :] - a[None, :, :]
    t = np.clip(np.einsum("nej,ej->ne", ap, ab) / denom[None, :], 0.0, 1.0)
    nearest = a[None, :, :] + t[..., None] * ab[None, :, :]
    diff = points[:, None, :] - nearest
    return np.hypot(diff[..., 0], diff[..., 1]), nearest
