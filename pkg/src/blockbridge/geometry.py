"""Planar convex geometry used by the rest of the package.

Everything works on convex polygons stored as ``(n, 2)`` float arrays in
counter-clockwise order. Predicates are vectorised over point and segment
batches because the roadmap calls them thousands of times per planning
iteration.
"""

from __future__ import annotations

from dataclasses import dataclass

from functools import lru_cache

import numpy as np

TOL = 1e-9


class GeometryError(ValueError):
    """Raised for degenerate or non-convex input polygons."""


def _cross2(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    return a[..., 0] * b[..., 1] - a[..., 1] * b[..., 0]


def convex_hull(points: np.ndarray) -> np.ndarray:
    """Monotone-chain hull, CCW, collinear points dropped."""
    pts = np.unique(np.asarray(points, dtype=float), axis=0)
    if len(pts) < 3:
        return pts
    pts = pts[np.lexsort((pts[:, 1], pts[:, 0]))]

    def half(seq):
        out: list[np.ndarray] = []
        for p in seq:
            while len(out) >= 2 and _cross2(out[-1] - out[-2], p - out[-2]) <= TOL:
                out.pop()
            out.append(p)
        return out

    lower = half(pts)
    upper = half(pts[::-1])
    return np.array(lower[:-1] + upper[:-1])


def signed_area(vertices: np.ndarray) -> float:
    x, y = vertices[:, 0], vertices[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


class Polygon2D:
    """Convex polygon with CCW vertices.

    Clockwise input is reversed. Non-convex or zero-area input raises
    :class:`GeometryError`.
    """

    __slots__ = ("vertices", "_bbox", "_normals", "_area", "_edges", "_centroid")

    def __init__(self, vertices):
        v = np.array(vertices, dtype=float).reshape(-1, 2)
        if len(v) < 3:
            raise GeometryError("polygon needs at least 3 vertices")
        if not np.all(np.isfinite(v)):
            raise GeometryError("polygon has non-finite coordinates")
        area = signed_area(v)
        if abs(area) <= TOL:
            raise GeometryError("polygon has zero area")
        if area < 0:
            v = v[::-1].copy()
            area = -area
        edges = np.roll(v, -1, axis=0) - v
        turns = _cross2(edges, np.roll(edges, -1, axis=0))
        if np.any(turns < -TOL * max(1.0, np.abs(edges).max() ** 2)):
            raise GeometryError("polygon is not convex")
        v.setflags(write=False)
        self.vertices = v
        self._area = area
        self._bbox = (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())
        lengths = np.hypot(edges[:, 0], edges[:, 1])
        keep = lengths > TOL
        # outward unit normals of a CCW polygon
        n = np.stack([edges[keep, 1], -edges[keep, 0]], axis=1) / lengths[keep, None]
        self._normals = n
        self._edges = None
        self._centroid = None

    @property
    def area(self) -> float:
        return self._area

    @property
    def bbox(self) -> tuple[float, float, float, float]:
        return self._bbox

    @property
    def normals(self) -> np.ndarray:
        return self._normals

    @property
    def edges(self) -> np.ndarray:
        """Edge vectors ``v[i+1] - v[i]``."""
        if self._edges is None:
            e = np.roll(self.vertices, -1, axis=0) - self.vertices
            e.setflags(write=False)
            self._edges = e
        return self._edges

    @property
    def centroid(self) -> np.ndarray:
        if self._centroid is None:
            v = self.vertices
            nxt = v + self.edges
            c = _cross2(v, nxt)
            a = c.sum() / 2.0
            out = np.array([((v[:, 0] + nxt[:, 0]) * c).sum(), ((v[:, 1] + nxt[:, 1]) * c).sum()]) / (6.0 * a)
            out.setflags(write=False)
            self._centroid = out
        return self._centroid

    def circumradius(self, about=None) -> float:
        about = self.centroid if about is None else np.asarray(about, dtype=float)
        return float(np.hypot(*(self.vertices - about).T).max())

    def __eq__(self, other):
        return isinstance(other, Polygon2D) and self.vertices.shape == other.vertices.shape and bool(
            np.array_equal(self.vertices, other.vertices)
        )

    def __hash__(self):
        return hash(self.vertices.tobytes())

    def __repr__(self):
        pts = ", ".join(f"({x:g}, {y:g})" for x, y in self.vertices)
        return f"Polygon2D([{pts}])"

    def moved(self, x: float, y: float, yaw: float) -> "Polygon2D":
        """Rigidly transformed copy; skips validation since shape is preserved."""
        c, s = np.cos(yaw), np.sin(yaw)
        rot = np.array([[c, -s], [s, c]])
        out = object.__new__(Polygon2D)
        v = self.vertices @ rot.T + (x, y)
        v.setflags(write=False)
        out.vertices = v
        out._area = self._area
        out._bbox = (v[:, 0].min(), v[:, 1].min(), v[:, 0].max(), v[:, 1].max())
        out._normals = self._normals @ rot.T
        out._edges = None
        out._centroid = None
        return out

    def tolist(self) -> list[list[float]]:
        return [[float(x), float(y)] for x, y in self.vertices]


def contains(poly: Polygon2D, points, tol: float = TOL) -> np.ndarray:
    """Closed point-in-polygon test, boundary counts as inside."""
    p = np.asarray(points, dtype=float)
    single = p.ndim == 1
    p = p.reshape(-1, 2)
    v = poly.vertices
    edges = poly.edges
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    rel = p[:, None, :] - v[None, :, :]
    # signed distance to each edge line, outward positive
    d = -_cross2(edges[None, :, :], rel) / np.maximum(lengths, TOL)[None, :]
    out = np.all(d <= tol, axis=1)
    return bool(out[0]) if single else out


def distance_to(poly: Polygon2D, points) -> np.ndarray:
    """Euclidean XY distance from each point to the polygon (0 inside)."""
    p = np.asarray(points, dtype=float).reshape(-1, 2)
    v = poly.vertices
    a = v[None, :, :]
    ab = poly.edges[None, :, :]
    ap = p[:, None, :] - a
    denom = np.maximum((ab**2).sum(-1), TOL)
    t = np.clip((ap * ab).sum(-1) / denom, 0.0, 1.0)
    closest = a + t[..., None] * ab
    dist = np.hypot(*(p[:, None, :] - closest).transpose(2, 0, 1)).min(axis=1)
    dist[contains(poly, p)] = 0.0
    return dist


def _project(vertices: np.ndarray, axes: np.ndarray):
    proj = vertices @ axes.T
    return proj.min(axis=0), proj.max(axis=0)


def overlaps(a: Polygon2D, b: Polygon2D, tol: float = TOL) -> bool:
    """True when the interiors intersect; shared edges do not count."""
    ax0, ay0, ax1, ay1 = a.bbox
    bx0, by0, bx1, by1 = b.bbox
    if ax0 >= bx1 - tol or bx0 >= ax1 - tol or ay0 >= by1 - tol or by0 >= ay1 - tol:
        return False
    axes = np.vstack([a.normals, b.normals])
    amin, amax = _project(a.vertices, axes)
    bmin, bmax = _project(b.vertices, axes)
    return bool(np.all((amax - bmin > tol) & (bmax - amin > tol)))


def segments_cross(poly: Polygon2D, p0, p1, tol: float = TOL) -> np.ndarray:
    """Which segments ``p0[i] -> p1[i]`` pass through the polygon interior.

    Separating-axis test with the polygon edge normals plus each segment's
    own normal. Segments that only graze the boundary are not reported.
    """
    p0 = np.asarray(p0, dtype=float).reshape(-1, 2)
    p1 = np.asarray(p1, dtype=float).reshape(-1, 2)
    m = len(p0)
    if m == 0:
        return np.zeros(0, dtype=bool)
    hit = np.ones(m, dtype=bool)
    x0, y0, x1, y1 = poly.bbox
    hit &= np.maximum(p0[:, 0], p1[:, 0]) > x0 + tol
    hit &= np.minimum(p0[:, 0], p1[:, 0]) < x1 - tol
    hit &= np.maximum(p0[:, 1], p1[:, 1]) > y0 + tol
    hit &= np.minimum(p0[:, 1], p1[:, 1]) < y1 - tol
    if not hit.any():
        return hit
    idx = np.nonzero(hit)[0]
    q0, q1 = p0[idx], p1[idx]
    n = poly.normals
    pmin, pmax = _project(poly.vertices, n)
    s0, s1 = q0 @ n.T, q1 @ n.T
    ok = np.all((np.maximum(s0, s1) - pmin > tol) & (pmax - np.minimum(s0, s1) > tol), axis=1)
    d = q1 - q0
    seg_n = np.stack([-d[:, 1], d[:, 0]], axis=1)
    ln = np.hypot(seg_n[:, 0], seg_n[:, 1])
    seg_n = seg_n / np.maximum(ln, TOL)[:, None]
    pv = poly.vertices @ seg_n.T  # (k, m)
    s = (q0 * seg_n).sum(1)
    ok &= (ln <= TOL) | ((pv.max(axis=0) - s > tol) & (s - pv.min(axis=0) > tol))
    hit[idx] = ok
    return hit


def clip(subject: Polygon2D, window: Polygon2D) -> Polygon2D | None:
    """Intersection of two convex polygons (Sutherland-Hodgman)."""
    out = subject.vertices.tolist()
    w = window.vertices
    for i in range(len(w)):
        a, b = w[i], w[(i + 1) % len(w)]
        if not out:
            return None
        inp, out = out, []
        e = b - a

        def inside(p):
            return e[0] * (p[1] - a[1]) - e[1] * (p[0] - a[0]) >= -TOL

        def meet(p, q):
            p, q = np.asarray(p), np.asarray(q)
            d = q - p
            den = e[0] * d[1] - e[1] * d[0]
            t = (e[1] * (p[0] - a[0]) - e[0] * (p[1] - a[1])) / den
            return (p + t * d).tolist()

        for j in range(len(inp)):
            cur, prev = inp[j], inp[j - 1]
            if inside(cur):
                if not inside(prev):
                    out.append(meet(prev, cur))
                out.append(cur)
            elif inside(prev):
                out.append(meet(prev, cur))
    if len(out) < 3:
        return None
    hull = convex_hull(np.array(out))
    if len(hull) < 3 or abs(signed_area(hull)) <= 1e-12:
        return None
    return Polygon2D(hull)


def dilate(poly: Polygon2D, delta: float, segments: int = 16) -> Polygon2D:
    """Outward offset by ``delta``; round corners approximated with ``segments`` points."""
    if delta <= 0:
        return poly
    ang = np.linspace(0.0, 2 * np.pi, segments, endpoint=False)
    # scale so the polygonal circle circumscribes the true one
    r = delta / np.cos(np.pi / segments)
    ring = np.stack([np.cos(ang), np.sin(ang)], axis=1) * r
    pts = (poly.vertices[:, None, :] + ring[None, :, :]).reshape(-1, 2)
    return Polygon2D(convex_hull(pts))


def erode(poly: Polygon2D, delta: float) -> Polygon2D | None:
    """Inward offset by ``delta``; ``None`` once the polygon vanishes."""
    if delta <= 0:
        return poly
    v = poly.vertices
    cur: Polygon2D | None = poly
    x0, y0, x1, y1 = poly.bbox
    big = 4.0 * (x1 - x0 + y1 - y0 + 1.0)
    for i in range(len(v)):
        a, b = v[i], v[(i + 1) % len(v)]
        e = b - a
        ln = float(np.hypot(*e))
        if ln <= TOL:
            continue
        inward = np.array([-e[1], e[0]]) / ln
        a2 = a + inward * delta
        u = e / ln
        half = Polygon2D([a2 - u * big, a2 + u * big, a2 + u * big + inward * big, a2 - u * big + inward * big])
        cur = clip(cur, half)
        if cur is None:
            return None
    return cur


def posed(canonical: Polygon2D, x: float, y: float, yaw: float) -> Polygon2D:
    """Rotate a canonical footprint about the origin then translate it."""
    return canonical.moved(x, y, yaw)


def transform_points(pts: np.ndarray, x: float, y: float, yaw: float) -> np.ndarray:
    c, s = np.cos(yaw), np.sin(yaw)
    rot = np.array([[c, -s], [s, c]])
    return np.asarray(pts, dtype=float) @ rot.T + np.array([x, y])


@dataclass(frozen=True)
class Band:
    """Ring of points within ``delta`` of a polygon outline, cut to a plane.

    ``outer`` is the dilated outline clipped to the placement boundary and
    ``hole`` the eroded outline. Either may be ``None``.
    """

    outer: Polygon2D | None
    hole: Polygon2D | None

    @property
    def empty(self) -> bool:
        return self.outer is None or self.area <= 1e-12

    @property
    def area(self) -> float:
        if self.outer is None:
            return 0.0
        a = self.outer.area
        if self.hole is not None:
            cut = clip(self.hole, self.outer)
            if cut is not None:
                a -= cut.area
        return max(a, 0.0)

    def contains(self, points) -> np.ndarray:
        p = np.asarray(points, dtype=float).reshape(-1, 2)
        if self.outer is None:
            return np.zeros(len(p), dtype=bool)
        inside = contains(self.outer, p)
        if self.hole is not None:
            inside &= ~contains(self.hole, p, tol=-1e-9)
        return inside


@lru_cache(maxsize=1024)
def delta_band(target: Polygon2D, placement: Polygon2D, delta: float) -> Band:
    """Points of ``placement`` whose XY distance to the outline of ``target`` is at most ``delta``.

    With ``delta == 0`` the band has no area and is reported empty.
    """
    if delta <= 0:
        return Band(None, None)
    outer = clip(dilate(target, delta), placement)
    if outer is None:
        return Band(None, None)
    return Band(outer, erode(target, delta))
