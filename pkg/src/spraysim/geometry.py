"""Planar polygon kernel: areas, membership, inward offsets, quad cells and
the windowed sprayed-area tracker.

Rings are ``(n, 2)`` float arrays without a repeated closing vertex. Outer
rings are counter-clockwise, holes clockwise.
"""

from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np
import shapely
from shapely.geometry import MultiPolygon
from shapely.geometry import Polygon as ShapelyPolygon

log = logging.getLogger(__name__)

#: Points closer than this to an edge count as inside.
BOUNDARY_EPS = 1e-9
#: Wedge cells below this area are discarded.
MIN_CELL_AREA = 1e-6


class GeometryError(ValueError):
    """Invalid or degenerate geometry."""


class FieldTooSmallError(GeometryError):
    """An inward offset annihilated the polygon."""


def as_ring(vertices) -> np.ndarray:
    ring = np.asarray(vertices, dtype=float).reshape(-1, 2)
    if len(ring) > 1 and np.allclose(ring[0], ring[-1]):
        ring = ring[:-1]
    if len(ring) < 3:
        raise GeometryError(f"ring needs at least 3 vertices, got {len(ring)}")
    if not np.all(np.isfinite(ring)):
        raise GeometryError("ring has non-finite coordinates")
    return ring


def polygon_area(poly) -> float:
    """Signed shoelace area; positive for counter-clockwise rings."""
    ring = as_ring(poly)
    x, y = ring[:, 0], ring[:, 1]
    return 0.5 * float(np.dot(x, np.roll(y, -1)) - np.dot(np.roll(x, -1), y))


def orient(poly, ccw: bool = True) -> np.ndarray:
    ring = as_ring(poly)
    if (polygon_area(ring) > 0) != ccw:
        ring = ring[::-1].copy()
    return ring


def polygon_centroid(poly) -> np.ndarray:
    ring = as_ring(poly)
    x, y = ring[:, 0], ring[:, 1]
    xn, yn = np.roll(x, -1), np.roll(y, -1)
    cross = x * yn - xn * y
    a = cross.sum() / 2.0
    if abs(a) < 1e-15:
        return ring.mean(axis=0)
    return np.array([((x + xn) * cross).sum(), ((y + yn) * cross).sum()]) / (6.0 * a)


def _segment_distance(p: np.ndarray, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Distance from point(s) ``p`` to segments ``a``-``b`` (broadcasting)."""
    ab = b - a
    denom = np.einsum("...i,...i->...", ab, ab)
    t = np.einsum("...i,...i->...", p - a, ab) / np.where(denom > 0, denom, 1.0)
    t = np.clip(t, 0.0, 1.0)
    proj = a + t[..., None] * ab
    return np.linalg.norm(p - proj, axis=-1)


def distance_to_ring(p, ring) -> float:
    ring = as_ring(ring)
    p = np.asarray(p, dtype=float)
    return float(_segment_distance(p, ring, np.roll(ring, -1, axis=0)).min())


def _even_odd(p: np.ndarray, ring: np.ndarray) -> bool:
    x, y = p
    xi, yi = ring[:, 0], ring[:, 1]
    xj, yj = np.roll(xi, 1), np.roll(yi, 1)
    straddle = (yi > y) != (yj > y)
    with np.errstate(divide="ignore", invalid="ignore"):
        xcross = xi + (y - yi) * (xj - xi) / (yj - yi)
    return bool(np.count_nonzero(straddle & (x < xcross)) % 2)


def point_in_ring(p, ring) -> bool:
    """Even-odd membership; points within ``BOUNDARY_EPS`` of an edge are inside."""
    ring = as_ring(ring)
    p = np.asarray(p, dtype=float)
    if distance_to_ring(p, ring) <= BOUNDARY_EPS:
        return True
    return _even_odd(p, ring)


def point_in_polygon(p, poly, holes: Sequence = ()) -> bool:
    """True iff ``p`` lies inside ``poly`` and outside every hole.

    Boundary points of the outer ring count as inside; boundary points of a
    hole count as inside the hole (so outside the polygon).
    """
    if not point_in_ring(p, poly):
        return False
    return not any(point_in_ring(p, h) for h in holes)


def points_in_polygon(points, poly, holes: Sequence = ()) -> np.ndarray:
    """Vectorised even-odd membership for many points (no boundary epsilon)."""
    pts = np.asarray(points, dtype=float).reshape(-1, 2)
    inside = _even_odd_many(pts, as_ring(poly))
    for h in holes:
        inside &= ~_even_odd_many(pts, as_ring(h))
    return inside


def _even_odd_many(pts: np.ndarray, ring: np.ndarray) -> np.ndarray:
    inside = np.zeros(len(pts), dtype=bool)
    x, y = pts[:, 0], pts[:, 1]
    for (xi, yi), (xj, yj) in zip(ring, np.roll(ring, 1, axis=0)):
        if yi == yj:
            continue
        straddle = (yi > y) != (yj > y)
        xcross = xi + (y - yi) * (xj - xi) / (yj - yi)
        inside ^= straddle & (x < xcross)
    return inside


def segments_intersect(p1, p2, q1, q2) -> bool:
    """Proper or touching intersection of closed segments p1-p2 and q1-q2."""

    def cross(o, a, b):
        return (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])

    d1, d2 = cross(q1, q2, p1), cross(q1, q2, p2)
    d3, d4 = cross(p1, p2, q1), cross(p1, p2, q2)
    if ((d1 > 0) != (d2 > 0)) and ((d3 > 0) != (d4 > 0)) and d1 and d2 and d3 and d4:
        return True

    def on_seg(o, a, b, d):
        return abs(d) <= 1e-12 and min(o[0], a[0]) - 1e-12 <= b[0] <= max(o[0], a[0]) + 1e-12 and (
            min(o[1], a[1]) - 1e-12 <= b[1] <= max(o[1], a[1]) + 1e-12
        )

    return on_seg(q1, q2, p1, d1) or on_seg(q1, q2, p2, d2) or on_seg(p1, p2, q1, d3) or on_seg(p1, p2, q2, d4)


def self_intersections(ring) -> list[tuple[int, int]]:
    """Pairs of non-adjacent edge indices that intersect (edge i = v[i] -> v[i+1])."""
    ring = as_ring(ring)
    n = len(ring)
    hits = []
    for i in range(n):
        a, b = ring[i], ring[(i + 1) % n]
        for j in range(i + 1, n):
            if j == i + 1 or (i == 0 and j == n - 1):
                continue
            if segments_intersect(a, b, ring[j], ring[(j + 1) % n]):
                hits.append((i, j))
    return hits


def to_shapely(poly, holes: Sequence = ()) -> ShapelyPolygon:
    return ShapelyPolygon(as_ring(poly), [as_ring(h) for h in holes])


def ring_from_shapely(geom) -> np.ndarray:
    """Exterior ring of the largest polygon in ``geom``, counter-clockwise."""
    if isinstance(geom, MultiPolygon):
        geom = max(geom.geoms, key=lambda g: g.area)
    return orient(np.asarray(geom.exterior.coords)[:-1], ccw=True)


def offset_inward(poly, d: float) -> np.ndarray:
    """Mitred inward offset of a simple ring by ``d`` metres.

    Mitre joins are limited to ``2*d``; sharper corners get bevelled. When the
    offset splits the polygon the largest piece is kept.
    """
    if d <= 0:
        raise GeometryError(f"offset distance must be positive, got {d}")
    shp = to_shapely(orient(poly))
    out = shp.buffer(-d, join_style="mitre", mitre_limit=2.0)
    if out.is_empty or out.area <= 0:
        raise FieldTooSmallError(f"field too small for headland: inward offset {d} m annihilates polygon")
    if isinstance(out, MultiPolygon):
        log.warning("inward offset by %.2f m split the polygon into %d parts; keeping the largest", d, len(out.geoms))
    return ring_from_shapely(out)


# --------------------------------------------------------------------------
# quad cells


@dataclass
class QuadCell:
    """One section's sprayed patch for one sampling step.

    ``corners`` are stored counter-clockwise. ``section_index`` is negative for
    sections left of the path and positive to the right.
    """

    corners: np.ndarray
    area: float
    kind: str
    section_index: int
    step: int = 0

    @property
    def centroid(self) -> np.ndarray:
        return polygon_centroid(self.corners)


def make_quad(corners, kind: str, section_index: int, step: int = 0) -> QuadCell | None:
    """Build a cell from 4 corner points; returns None for degenerate wedges.

    Self-intersecting quads (sections moving backwards through a turn) are
    replaced by their convex hull.
    """
    pts = np.asarray(corners, dtype=float).reshape(4, 2)
    quad = convexify_quads(pts[None])[0]
    area = polygon_area_many(quad[None])[0]
    if kind == "wedge" and area < MIN_CELL_AREA:
        return None
    if area <= 0:
        return None
    return QuadCell(quad, float(area), kind, int(section_index), step)


def polygon_area_many(quads: np.ndarray) -> np.ndarray:
    """Signed shoelace areas of an ``(m, k, 2)`` stack of rings."""
    x, y = quads[..., 0], quads[..., 1]
    return 0.5 * (np.sum(x * np.roll(y, -1, axis=-1), axis=-1) - np.sum(np.roll(x, -1, axis=-1) * y, axis=-1))


def convexify_quads(quads: np.ndarray) -> np.ndarray:
    """Reorder each quad of an ``(m, 4, 2)`` stack into a counter-clockwise convex ring.

    Points are sorted by angle about their mean, which repairs bow-ties. A
    reflex vertex (non-convex quad) collapses onto its neighbour so the result
    is the convex hull.
    """
    q = np.asarray(quads, dtype=float)
    c = q.mean(axis=1, keepdims=True)
    ang = np.arctan2(q[..., 1] - c[..., 1], q[..., 0] - c[..., 0])
    order = np.argsort(ang, axis=1)
    out = np.take_along_axis(q, order[..., None], axis=1)
    # collapse reflex vertices
    for k in range(4):
        prev = out[:, (k - 1) % 4]
        cur = out[:, k]
        nxt = out[:, (k + 1) % 4]
        cr = (cur[:, 0] - prev[:, 0]) * (nxt[:, 1] - prev[:, 1]) - (cur[:, 1] - prev[:, 1]) * (nxt[:, 0] - prev[:, 0])
        reflex = cr < 0
        if np.any(reflex):
            out[reflex, k] = prev[reflex]
    return out


def quads_contain(quads: np.ndarray, points: np.ndarray, eps: float = BOUNDARY_EPS) -> np.ndarray:
    """Pairwise test: does convex CCW quad ``quads[j]`` contain ``points[j]``?

    Both arrays share the leading dimension. Edge-distance tolerance ``eps``
    makes boundary points inside.
    """
    a = quads
    b = np.roll(quads, -1, axis=1)
    e = b - a
    rel = points[:, None, :] - a
    cross = e[..., 0] * rel[..., 1] - e[..., 1] * rel[..., 0]
    length = np.linalg.norm(e, axis=-1)
    signed = np.where(length > 0, cross / np.where(length > 0, length, 1.0), np.inf)
    return np.all(signed >= -eps, axis=1)


# --------------------------------------------------------------------------
# windowed sprayed-area state


class SprayedPolygonState:
    """Union of sprayed cells over the last ``window`` sampling steps.

    ``window=None`` keeps every step. Membership is exact with respect to the
    union of stored quads; :meth:`union` builds the polygon explicitly.
    """

    def __init__(self, window: int | None = 10):
        self.window = window
        self._steps: deque[np.ndarray] = deque()
        self._union = None

    def __len__(self) -> int:
        return len(self._steps)

    @property
    def cells(self) -> np.ndarray:
        if not self._steps:
            return np.zeros((0, 4, 2))
        return np.concatenate(list(self._steps))

    def add_step(self, cells: Iterable) -> None:
        quads = [c.corners if isinstance(c, QuadCell) else np.asarray(c, dtype=float) for c in cells]
        arr = np.stack(quads) if quads else np.zeros((0, 4, 2))
        self._steps.append(convexify_quads(arr) if len(arr) else arr)
        if self.window is not None:
            while len(self._steps) > self.window:
                self._steps.popleft()
        self._union = None

    def contains_many(self, points) -> np.ndarray:
        pts = np.asarray(points, dtype=float).reshape(-1, 2)
        quads = self.cells
        if len(quads) == 0 or len(pts) == 0:
            return np.zeros(len(pts), dtype=bool)
        lo = quads.min(axis=1)
        hi = quads.max(axis=1)
        # bounding-box prefilter, then the exact convex test on candidates
        near = ((pts[:, None, 0] >= lo[None, :, 0]) & (pts[:, None, 0] <= hi[None, :, 0])
                & (pts[:, None, 1] >= lo[None, :, 1]) & (pts[:, None, 1] <= hi[None, :, 1]))
        pi, qi = np.nonzero(near)
        out = np.zeros(len(pts), dtype=bool)
        if len(pi):
            hit = quads_contain(quads[qi], pts[pi])
            out[pi[hit]] = True
        return out

    def contains(self, point) -> bool:
        return bool(self.contains_many(point)[0])

    def union(self):
        if self._union is None:
            quads = self.cells
            polys = [ShapelyPolygon(q) for q in quads if polygon_area_many(q[None])[0] > 0]
            self._union = shapely.unary_union(polys) if polys else ShapelyPolygon()
        return self._union

    @property
    def area(self) -> float:
        return float(self.union().area)


def sprayed_union_windowed(state: SprayedPolygonState | None, new_cells, window: int | None = 10) -> SprayedPolygonState:
    """Add one sampling step of cells to ``state`` (created if None) and return it."""
    if state is None:
        state = SprayedPolygonState(window)
    new_cells = list(new_cells)
    if new_cells:
        state.add_step(new_cells)
    return state
