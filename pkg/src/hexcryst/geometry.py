"""Convex polygon primitives: construction, half-plane clipping, areas,
centroids, polar second moments, diameters, edge counts.

Polygons are immutable counterclockwise vertex lists. Second moments are
evaluated with the closed-form fan decomposition into triangles, so values
carry no quadrature error; energy differences of order 1e-6 downstream stay
meaningful. All tolerances are expressed in the length units of the scaled
domain through the single constant TOL_GEOM.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

# Vertex dedup, convexity slack, and empty-cell detection all share one
# tolerance; domains here have O(1)-O(100) extents, leaving ample headroom.
TOL_GEOM = 1e-9


class GeometryError(ValueError):
    """Invalid geometric input (non-convex, degenerate, wrong orientation)."""


@dataclass(frozen=True)
class HalfPlane:
    """The closed half-plane {x : normal . x <= offset} with |normal| = 1."""

    normal: tuple[float, float]
    offset: float

    def __post_init__(self):
        nx, ny = self.normal
        if abs(math.hypot(nx, ny) - 1.0) > TOL_GEOM:
            raise GeometryError(f"half-plane normal not unit: {self.normal}")

    @staticmethod
    def from_direction(direction, offset: float) -> "HalfPlane":
        """Normalize an arbitrary nonzero direction into a HalfPlane."""
        dx, dy = float(direction[0]), float(direction[1])
        norm = math.hypot(dx, dy)
        if norm <= TOL_GEOM:
            raise GeometryError("half-plane direction is numerically zero")
        return HalfPlane((dx / norm, dy / norm), float(offset) / norm)

    def signed_distance(self, point) -> float:
        """Positive outside the half-plane, negative inside."""
        return self.normal[0] * point[0] + self.normal[1] * point[1] - self.offset


class ConvexPolygon:
    """Immutable convex polygon with counterclockwise vertices.

    Construction dedups vertices closer than TOL_GEOM and requires signed
    area > 0 and all consecutive cross products >= -TOL_GEOM. Collinear
    vertices are legal and preserved: partition audits count them as edges.
    """

    __slots__ = ("_v",)

    def __init__(self, vertices, validate: bool = True):
        v = np.asarray(vertices, dtype=float)
        if v.ndim != 2 or v.shape[1] != 2:
            raise GeometryError("vertices must be an (n, 2) array-like")
        if not np.all(np.isfinite(v)):
            raise GeometryError("vertices must be finite")
        v = _dedup_ring(v)
        if validate:
            if len(v) < 3:
                raise GeometryError("polygon needs at least 3 distinct vertices")
            cross = _ring_crosses(v)
            if np.any(cross < -TOL_GEOM * np.max(np.abs(v) + 1.0)):
                raise GeometryError("vertices are not convex counterclockwise")
            if _shoelace(v) <= 0.0:
                raise GeometryError("polygon has non-positive signed area")
        elif len(v) < 3:
            raise GeometryError("degenerate polygon")
        v.setflags(write=False)
        object.__setattr__(self, "_v", v)

    @property
    def vertices(self) -> np.ndarray:
        """Read-only (n, 2) vertex array, counterclockwise."""
        return self._v

    def __len__(self) -> int:
        return len(self._v)

    def __repr__(self) -> str:
        return f"ConvexPolygon({len(self._v)} vertices, area={area(self):.6g})"


def _dedup_ring(v: np.ndarray) -> np.ndarray:
    """Drop consecutive vertices (cyclically) closer than TOL_GEOM."""
    if len(v) == 0:
        return v
    keep = []
    for p in v:
        if not keep or math.hypot(p[0] - keep[-1][0], p[1] - keep[-1][1]) > TOL_GEOM:
            keep.append((float(p[0]), float(p[1])))
    while len(keep) > 1 and math.hypot(keep[0][0] - keep[-1][0],
                                       keep[0][1] - keep[-1][1]) <= TOL_GEOM:
        keep.pop()
    return np.array(keep, dtype=float).reshape(-1, 2)


def _ring_crosses(v: np.ndarray) -> np.ndarray:
    a = np.roll(v, -1, axis=0) - v
    b = np.roll(a, -1, axis=0)
    return a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]


def _shoelace(v: np.ndarray) -> float:
    x, y = v[:, 0], v[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1)))


def area(poly: ConvexPolygon) -> float:
    """Shoelace area; positive for the CCW polygons this module produces."""
    return _shoelace(poly.vertices)


def perimeter(poly: ConvexPolygon) -> float:
    v = poly.vertices
    d = np.roll(v, -1, axis=0) - v
    return float(np.hypot(d[:, 0], d[:, 1]).sum())


def centroid(poly: ConvexPolygon) -> np.ndarray:
    """Center of mass; strictly interior by convexity."""
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    cross = v[:, 0] * w[:, 1] - v[:, 1] * w[:, 0]
    a = 0.5 * cross.sum()
    cx = ((v[:, 0] + w[:, 0]) * cross).sum() / (6.0 * a)
    cy = ((v[:, 1] + w[:, 1]) * cross).sum() / (6.0 * a)
    return np.array([cx, cy])


def second_moment(poly: ConvexPolygon, ref) -> float:
    """Polar second moment: the exact integral of |x - ref|^2 over the polygon.

    Fan decomposition from ref: for the triangle (ref, a, b) with u = a - ref,
    v = b - ref the integral is cross(u, v) * (|u|^2 + u.v + |v|^2) / 12.
    Signed crosses make the sum exact even when ref lies outside.
    """
    rx, ry = float(ref[0]), float(ref[1])
    v = poly.vertices
    ux = v[:, 0] - rx
    uy = v[:, 1] - ry
    wx = np.roll(ux, -1)
    wy = np.roll(uy, -1)
    cross = ux * wy - uy * wx
    quad = ux * ux + uy * uy + ux * wx + uy * wy + wx * wx + wy * wy
    return float((cross * quad).sum() / 12.0)


def min_second_moment(poly: ConvexPolygon) -> tuple[np.ndarray, float]:
    """Minimize the polar second moment over reference points.

    The integrand is a convex quadratic in the reference, so the unconstrained
    minimizer is the centroid, which is interior by convexity; no constrained
    search is needed.
    """
    c = centroid(poly)
    return c, second_moment(poly, c)


def diameter(poly: ConvexPolygon) -> float:
    """Maximum vertex-to-vertex distance."""
    v = poly.vertices
    # Cells here have tens of vertices at most; the quadratic scan is exact
    # and beats calipers bookkeeping at this size.
    d2 = ((v[:, None, :] - v[None, :, :]) ** 2).sum(-1)
    return float(np.sqrt(d2.max()))


def edge_count(poly: ConvexPolygon) -> int:
    """Number of edges longer than TOL_GEOM."""
    v = poly.vertices
    d = np.roll(v, -1, axis=0) - v
    return int((np.hypot(d[:, 0], d[:, 1]) > TOL_GEOM).sum())


def contains(poly: ConvexPolygon, point, tol: float = TOL_GEOM) -> bool:
    """True if the point lies in the polygon (boundary inclusive up to tol)."""
    px, py = float(point[0]), float(point[1])
    v = poly.vertices
    w = np.roll(v, -1, axis=0)
    cross = (w[:, 0] - v[:, 0]) * (py - v[:, 1]) - (w[:, 1] - v[:, 1]) * (px - v[:, 0])
    return bool(np.all(cross >= -tol * (1.0 + abs(px) + abs(py))))


def clip(poly: ConvexPolygon, h: HalfPlane) -> ConvexPolygon | None:
    """Intersect a convex polygon with a half-plane.

    Returns a fresh CCW polygon, or None when the intersection is empty or a
    sliver below TOL_GEOM area. Non-binding constraints return an equal
    polygon (still a new object; polygons are values).
    """
    nx, ny = h.normal
    off = h.offset
    v = poly.vertices
    out = _clip_ring(v, nx, ny, off)
    if out is None:
        return None
    return ConvexPolygon(out, validate=False)


def _clip_ring(v: np.ndarray, nx: float, ny: float, off: float):
    """Sutherland-Hodgman step for one half-plane on a raw vertex ring."""
    dist = v[:, 0] * nx + v[:, 1] * ny - off
    inside = dist <= TOL_GEOM
    if inside.all():
        return v.copy()
    if not inside.any():
        return None
    n = len(v)
    out: list[tuple[float, float]] = []
    for i in range(n):
        j = (i + 1) % n
        if inside[i]:
            out.append((v[i, 0], v[i, 1]))
            if not inside[j]:
                t = dist[i] / (dist[i] - dist[j])
                out.append((v[i, 0] + t * (v[j, 0] - v[i, 0]),
                            v[i, 1] + t * (v[j, 1] - v[i, 1])))
        elif inside[j]:
            t = dist[i] / (dist[i] - dist[j])
            out.append((v[i, 0] + t * (v[j, 0] - v[i, 0]),
                        v[i, 1] + t * (v[j, 1] - v[i, 1])))
    ring = _dedup_ring(np.array(out, dtype=float).reshape(-1, 2))
    if len(ring) < 3 or _shoelace(ring) <= TOL_GEOM:
        return None
    return ring


def translate(poly: ConvexPolygon, t) -> ConvexPolygon:
    return ConvexPolygon(poly.vertices + np.asarray(t, dtype=float), validate=False)


def rotate(poly: ConvexPolygon, theta: float, about=(0.0, 0.0)) -> ConvexPolygon:
    c, s = math.cos(theta), math.sin(theta)
    r = np.array([[c, -s], [s, c]])
    o = np.asarray(about, dtype=float)
    return ConvexPolygon((poly.vertices - o) @ r.T + o, validate=False)


def scale(poly: ConvexPolygon, s: float) -> ConvexPolygon:
    """Scale about the origin by a positive factor."""
    if s <= 0:
        raise GeometryError("scale factor must be positive")
    return ConvexPolygon(poly.vertices * float(s), validate=False)


def unit_square() -> ConvexPolygon:
    return ConvexPolygon([(0.0, 0.0), (1.0, 0.0), (1.0, 1.0), (0.0, 1.0)])


def regular_polygon(n: int, poly_area: float = 1.0, center=(0.0, 0.0),
                    rotation: float = 0.0) -> ConvexPolygon:
    """Regular n-gon of prescribed area. Vertex 0 sits at angle `rotation`."""
    if n < 3:
        raise GeometryError("need n >= 3")
    if poly_area <= 0:
        raise GeometryError("area must be positive")
    # area = n/2 * R^2 * sin(2 pi / n)
    radius = math.sqrt(2.0 * poly_area / (n * math.sin(2.0 * math.pi / n)))
    ang = rotation + 2.0 * math.pi * np.arange(n) / n
    cx, cy = float(center[0]), float(center[1])
    verts = np.column_stack([cx + radius * np.cos(ang), cy + radius * np.sin(ang)])
    return ConvexPolygon(verts)


def random_convex_polygon(rng: np.random.Generator, n_points: int = 8,
                          scale_len: float = 1.0) -> ConvexPolygon:
    """Convex hull of random points in a disk; test helper."""
    from scipy.spatial import ConvexHull

    while True:
        pts = rng.normal(size=(max(n_points, 3), 2)) * scale_len
        hull = ConvexHull(pts)
        verts = pts[hull.vertices]
        if len(verts) >= 3 and _shoelace(verts) > 100 * TOL_GEOM:
            return ConvexPolygon(verts)
