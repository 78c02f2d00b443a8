"""Lane-grid fitting and the two area-coverage path patterns.

``M1`` sprays the full headland first and then serves mainfield lanes in a
meandering (boustrophedon) order. ``M2`` interleaves pairs of lanes with
partial headland runs: drive along the headland past the next lane
(``A-D``, off), spray the farther lane out (``D-E``), turn (``E-J``, off),
spray the nearer lane back (``J-K``), rejoin the headland (``K-A``, off) and
spray the headland onward to the next pattern start (``A-M``).
Both plans are closed tours that start and end on the headland path next
to the field entry.
"""

from __future__ import annotations

import csv
import io
import logging
import math
from dataclasses import dataclass, field

import numpy as np
import shapely
from shapely.geometry import MultiPolygon
from shapely.geometry import Polygon as ShapelyPolygon

from .field_io import FieldSpec, RunConfig
from .geometry import FieldTooSmallError, offset_inward, orient, ring_from_shapely
from .paths import Path, Pose, Ring, dubins_candidates, dubins_prims, sample_prims, with_meta, wrap_angle

log = logging.getLogger(__name__)

SEGMENT_KINDS = ("headland", "lane", "transition")


class PlanningError(RuntimeError):
    pass


@dataclass
class Lane:
    id: int
    row: int
    p0: np.ndarray  # end with the smaller lane-axis coordinate
    p1: np.ndarray
    ring: tuple = (0, 0)  # ring index attached to each end (0 = outer headland)

    @property
    def length(self) -> float:
        return float(np.hypot(*(self.p1 - self.p0)))

    def end(self, which: int) -> np.ndarray:
        return self.p0 if which == 0 else self.p1


@dataclass
class LaneGrid:
    field: FieldSpec
    working_width: float
    radius: float
    headland: Ring
    obstacle_rings: list
    mainfield: object  # shapely (Multi)Polygon
    lanes: list
    clusters: list  # lists of lane ids, ordered by row
    axis: np.ndarray
    normal: np.ndarray

    @property
    def rings(self) -> list:
        return [self.headland] + list(self.obstacle_rings)

    @property
    def mainfield_boundary(self) -> list[np.ndarray]:
        """Intersection line(s) between mainfield and headland area."""
        geoms = self.mainfield.geoms if isinstance(self.mainfield, MultiPolygon) else [self.mainfield]
        out = []
        for g in geoms:
            out.append(np.asarray(g.exterior.coords)[:-1])
            out.extend(np.asarray(h.coords)[:-1] for h in g.interiors)
        return out

    intersection_line = mainfield_boundary

    def lane(self, lane_id: int) -> Lane:
        return self.lanes[lane_id]


def _polygons(geom) -> list:
    if geom.is_empty:
        return []
    if isinstance(geom, ShapelyPolygon):
        return [geom] if geom.area > 1e-9 else []
    if hasattr(geom, "geoms"):
        out = []
        for g in geom.geoms:
            out += _polygons(g)
        return out
    return []


def _longest_edge_direction(contour: np.ndarray) -> np.ndarray:
    edges = np.roll(contour, -1, axis=0) - contour
    lengths = np.hypot(edges[:, 0], edges[:, 1])
    e = edges[int(np.argmax(lengths))]
    return e / np.hypot(*e)


def build_lane_grid(field: FieldSpec, cfg: RunConfig) -> LaneGrid:
    """Headland ring at depth W/2, obstacle rings, mainfield and lanes spaced W."""
    W, r = cfg.working_width, cfg.min_turn_radius
    contour = orient(field.contour)
    ring_poly = offset_inward(contour, W / 2)
    headland = Ring.from_polygon(ring_poly, r, name="headland")

    outer = ShapelyPolygon(contour)
    try:
        core = outer.buffer(-W, join_style="mitre", mitre_limit=2.0)
    except Exception as exc:  # pragma: no cover - shapely raises only on invalid input
        raise FieldTooSmallError(str(exc)) from exc
    obstacle_rings = []
    blocked = []
    for k, obs in enumerate(field.obstacles):
        shp = ShapelyPolygon(orient(obs))
        ring = ring_from_shapely(shp.buffer(W / 2, quad_segs=8))
        obstacle_rings.append(Ring.from_polygon(ring, r, name=f"obstacle{k}"))
        blocked.append(shp.buffer(W, quad_segs=8))
    mainfield = core.difference(shapely.unary_union(blocked)) if blocked else core
    pieces = _polygons(mainfield)
    if not pieces:
        raise FieldTooSmallError("field too small for one headland pass: no mainfield left")
    mainfield = pieces[0] if len(pieces) == 1 else MultiPolygon(pieces)

    u = _longest_edge_direction(contour)
    v = np.array([-u[1], u[0]])
    coords = np.concatenate([np.asarray(p.exterior.coords) for p in pieces])
    tv = coords @ v
    tu = coords @ u
    tmin, tmax = float(tv.min()), float(tv.max())
    umin, umax = float(tu.min()) - 1.0, float(tu.max()) + 1.0
    n_rows = max(1, int(math.ceil((tmax - tmin) / W - 1e-9)))

    lanes: list[Lane] = []
    rows: list[list[int]] = []
    for j in range(n_rows):
        c = tmin + W / 2 + j * W
        band = ShapelyPolygon([umin * u + (c - W / 2) * v, umax * u + (c - W / 2) * v,
                               umax * u + (c + W / 2) * v, umin * u + (c + W / 2) * v])
        comps = _polygons(band.intersection(mainfield))
        spans = sorted((float((np.asarray(g.exterior.coords) @ u).min()), float((np.asarray(g.exterior.coords) @ u).max()))
                       for g in comps)
        # merge touching spans (component split by numerical slivers)
        merged: list[list[float]] = []
        for a, b in spans:
            if merged and a <= merged[-1][1] + 1e-9:
                merged[-1][1] = max(merged[-1][1], b)
            else:
                merged.append([a, b])
        row_ids = []
        for a, b in merged:
            if b - a < 1e-6:
                continue
            lane = Lane(len(lanes), j, a * u + c * v, b * u + c * v)
            lanes.append(lane)
            row_ids.append(lane.id)
        rows.append(row_ids)

    rings = [headland] + obstacle_rings
    for lane in lanes:
        lane.ring = tuple(int(np.argmin([rg.distance(lane.end(e)) for rg in rings])) for e in (0, 1))

    clusters = _decompose(lanes, rows, u)
    return LaneGrid(field, W, r, headland, obstacle_rings, mainfield, lanes, clusters, u, v)


def _decompose(lanes: list[Lane], rows: list[list[int]], u: np.ndarray) -> list[list[int]]:
    """Boustrophedon cell decomposition: chain lanes of consecutive rows while
    the overlap relation between their spans is one-to-one."""

    def span(lid):
        ln = lanes[lid]
        return float(ln.p0 @ u), float(ln.p1 @ u)

    def overlaps(a, b):
        (a0, a1), (b0, b1) = span(a), span(b)
        return min(a1, b1) - max(a0, b0) > 0

    clusters: list[list[int]] = []
    open_: dict[int, int] = {}  # lane id at end of cluster -> cluster index
    prev: list[int] = []
    for row in rows:
        new_open = {}
        for lid in row:
            ups = [p for p in prev if overlaps(p, lid)]
            if len(ups) == 1 and ups[0] in open_:
                downs = [q for q in row if overlaps(ups[0], q)]
                same_ring = lanes[ups[0]].ring == lanes[lid].ring
                if len(downs) == 1 and same_ring:
                    ci = open_[ups[0]]
                    clusters[ci].append(lid)
                    new_open[lid] = ci
                    continue
            clusters.append([lid])
            new_open[lid] = len(clusters) - 1
        open_ = new_open
        prev = row
    return clusters


# --------------------------------------------------------------------------
# plans


@dataclass
class PathPlan:
    """Uniformly sampled path with per-step labels.

    Arrays indexed by step ``k`` describe the motion from sample ``k`` to
    ``k+1``; ``yaw_rate[k] = wrap(heading[k+1]-heading[k]) * v_ref / ds``.
    """

    method: str
    xy: np.ndarray
    heading: np.ndarray
    yaw_rate: np.ndarray
    kind: np.ndarray
    lane_id: np.ndarray
    spray: np.ndarray
    ring: np.ndarray
    phase: np.ndarray
    ds: float
    v_ref: float
    prims: list = field(default_factory=list, repr=False)

    @property
    def n_steps(self) -> int:
        return len(self.xy) - 1

    @property
    def length(self) -> float:
        return float(self.ds * self.n_steps)

    total_length = length

    @property
    def dheading(self) -> np.ndarray:
        return wrap_angle(np.diff(self.heading))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["x", "y", "heading", "yaw_rate", "segment_kind", "lane_id"])
        n = self.n_steps
        for k in range(n + 1):
            s = min(k, n - 1)
            lid = int(self.lane_id[s])
            w.writerow([f"{self.xy[k, 0]:.6f}", f"{self.xy[k, 1]:.6f}", f"{self.heading[k]:.9f}",
                        f"{self.yaw_rate[s]:.9f}", self.kind[s], "" if lid < 0 else lid])
        return buf.getvalue()


def _plan_from_prims(method: str, prims: list, cfg: RunConfig) -> PathPlan:
    pts, hdg, metas = sample_prims(prims, cfg.sample_spacing)
    hdg = np.asarray(wrap_angle(hdg), dtype=float)
    n = len(pts) - 1
    ds = Path(prims).length / n
    dh = wrap_angle(np.diff(hdg))
    return PathPlan(
        method=method,
        xy=pts,
        heading=hdg,
        yaw_rate=dh * cfg.v_ref / ds,
        kind=np.array([m.get("kind", "transition") for m in metas], dtype=object),
        lane_id=np.array([m.get("lane_id", -1) for m in metas], dtype=int),
        spray=np.array([bool(m.get("spray", False)) for m in metas]),
        ring=np.array([m.get("ring", -1) for m in metas], dtype=int),
        phase=np.array([m.get("phase", "") for m in metas], dtype=object),
        ds=ds,
        v_ref=cfg.v_ref,
        prims=prims,
    )


def _pose_of(prims: list) -> Pose:
    return Path(prims).end_pose()


def _dubins(a: Pose, b: Pose, r: float, **meta) -> list:
    cands = dubins_candidates(a, b, r)
    if not cands:  # pragma: no cover - a Dubins path always exists
        raise PlanningError("no turn maneuver found")
    _, word, params = cands[0]
    return with_meta(dubins_prims(a, word, params, r), **meta)


def _dubins_len(a: Pose, b: Pose, r: float) -> float:
    return dubins_candidates(a, b, r)[0][0]


def _lane_prims(lane: Lane, forward: bool, **meta) -> list:
    from .paths import Line

    a, b = (lane.p0, lane.p1) if forward else (lane.p1, lane.p0)
    return [Line(a.copy(), b.copy(), dict(kind="lane", lane_id=lane.id, spray=True, **meta))]


def _lane_pose(lane: Lane, forward: bool, at_end: bool) -> Pose:
    a, b = (lane.p0, lane.p1) if forward else (lane.p1, lane.p0)
    h = math.atan2(*(b - a)[::-1])
    p = b if at_end else a
    return Pose(float(p[0]), float(p[1]), h)


def _ring_loop(ring: Ring, idx: int, s0: float, forward: bool, spray: bool = True, phase: str = "loop") -> list:
    return with_meta(ring.run(s0, ring.length, forward), kind="headland", spray=spray, ring=idx, phase=phase)


def _best_ring_entry(pose: Pose, ring: Ring, r: float) -> tuple[float, bool]:
    s = ring.project(pose.xy)
    best = None
    for fwd in (True, False):
        L = _dubins_len(pose, ring.pose(s, fwd), r)
        if best is None or L < best[0]:
            best = (L, fwd)
    return s, best[1]


def _serpentine(grid: LaneGrid, ids: list[int], first_forward: bool, r: float) -> list:
    prims: list = []
    fwd = first_forward
    for n, lid in enumerate(ids):
        lane = grid.lanes[lid]
        if n:
            prims += _dubins(_pose_of(prims), _lane_pose(lane, fwd, False), r, kind="transition", spray=False, phase="turn")
        prims += _lane_prims(lane, fwd, phase="lane")
        fwd = not fwd
    return prims


def _cluster_entry_options(grid: LaneGrid, ids: list[int]):
    """(ordered ids, first-lane direction) for the four ways to start a cluster."""
    for order in (ids, ids[::-1]):
        for fwd in (True, False):
            yield order, fwd


def plan_m1(grid: LaneGrid, cfg: RunConfig) -> PathPlan:
    """Full headland coverage, obstacle headlands, then lanes in meandering order."""
    r = cfg.min_turn_radius
    ring = grid.headland
    s_e = ring.project(grid.field.entry_point)
    prims = _ring_loop(ring, 0, s_e, True)
    for k, orb in enumerate(grid.obstacle_rings, start=1):
        pose = _pose_of(prims)
        s, fwd = _best_ring_entry(pose, orb, r)
        prims += _dubins(pose, orb.pose(s, fwd), r, kind="transition", spray=False, phase="transition")
        prims += _ring_loop(orb, k, s, fwd)

    remaining = list(range(len(grid.clusters)))
    while remaining:
        pose = _pose_of(prims)
        best = None
        for ci in remaining:
            ids = grid.clusters[ci]
            for order, fwd in _cluster_entry_options(grid, ids):
                L = _dubins_len(pose, _lane_pose(grid.lanes[order[0]], fwd, False), r)
                if best is None or L < best[0]:
                    best = (L, ci, order, fwd)
        _, ci, order, fwd = best
        remaining.remove(ci)
        first = _lane_pose(grid.lanes[order[0]], fwd, False)
        prims += _dubins(pose, first, r, kind="transition", spray=False, phase="transition")
        prims += _serpentine(grid, order, fwd, r)

    pose = _pose_of(prims)
    goal = min((ring.pose(s_e, f) for f in (True, False)), key=lambda g: _dubins_len(pose, g, r))
    prims += _dubins(pose, goal, r, kind="transition", spray=False, phase="return")
    return _plan_from_prims("M1", prims, cfg)


# --------------------------------------------------------------------------
# M2


class _RingCover:
    """Sprayed arc-length intervals of one ring."""

    def __init__(self, length: float):
        self.L = length
        self.iv: list[tuple[float, float]] = []

    def _norm(self, s0: float, dist: float, forward: bool) -> list[tuple[float, float]]:
        a = s0 if forward else s0 - dist
        a = a % self.L
        b = a + dist
        if b <= self.L:
            return [(a, b)]
        return [(a, self.L), (0.0, b - self.L)]

    def add(self, s0: float, dist: float, forward: bool) -> None:
        for a, b in self._norm(s0, dist, forward):
            self.iv.append((a, b))
        self.iv.sort()
        merged = []
        for a, b in self.iv:
            if merged and a <= merged[-1][1] + 1e-9:
                merged[-1] = (merged[-1][0], max(merged[-1][1], b))
            else:
                merged.append((a, b))
        self.iv = merged

    def covered(self) -> float:
        return sum(b - a for a, b in self.iv)

    def gaps(self) -> list[tuple[float, float]]:
        out, s = [], 0.0
        for a, b in self.iv:
            if a > s + 1e-9:
                out.append((s, a))
            s = max(s, b)
        if s < self.L - 1e-9:
            out.append((s, self.L))
        return out

    def split_run(self, s0: float, dist: float, forward: bool, min_piece: float = 1e-6):
        """Split a run into ``(offset, length, sprayed_already)`` pieces."""
        cuts = {0.0, dist}
        for a, b in self.iv:
            for x in (a, b):
                for shift in (-self.L, 0.0, self.L):
                    off = ((x + shift) - s0) if forward else (s0 - (x + shift))
                    if 0 < off < dist:
                        cuts.add(off)
        cuts = sorted(cuts)
        pieces = []
        for o0, o1 in zip(cuts[:-1], cuts[1:]):
            if o1 - o0 < min_piece:
                continue
            mid = s0 + (o0 + o1) / 2 if forward else s0 - (o0 + o1) / 2
            mid %= self.L
            done = any(a - 1e-9 <= mid <= b + 1e-9 for a, b in self.iv)
            pieces.append((o0, o1 - o0, done))
        return pieces


class _M2Builder:
    def __init__(self, grid: LaneGrid, cfg: RunConfig):
        self.grid = grid
        self.cfg = cfg
        self.r = cfg.min_turn_radius
        self.rings = grid.rings
        self.cover = [_RingCover(rg.length) for rg in self.rings]
        self.prims: list = []
        self.on_ring = -1
        self.start = grid.headland.pose(grid.headland.project(grid.field.entry_point), True)

    @property
    def pose(self) -> Pose:
        return _pose_of(self.prims) if self.prims else self.start

    # ring travel -------------------------------------------------------
    def ring_run(self, idx: int, s0: float, dist: float, forward: bool, spray: bool | None, phase: str) -> None:
        """Travel along ring ``idx``; ``spray=None`` sprays exactly the not yet sprayed parts."""
        if dist <= 1e-9:
            return
        ring, cov = self.rings[idx], self.cover[idx]
        if spray is None:
            for off, length, done in cov.split_run(s0, dist, forward):
                s = s0 + off if forward else s0 - off
                self.prims += with_meta(ring.run(s, length, forward), kind="headland", spray=not done, ring=idx, phase=phase)
            cov.add(s0, dist, forward)
        else:
            self.prims += with_meta(ring.run(s0, dist, forward), kind="headland", spray=spray, ring=idx, phase=phase)
            if spray:
                cov.add(s0, dist, forward)

    def dubins_to(self, goal: Pose, phase: str) -> None:
        self.prims += _dubins(self.pose, goal, self.r, kind="transition", spray=False, phase=phase)

    def _offsets(self):
        return np.arange(0.0, 4.0 * self.r + 1e-9, 0.25 * self.r)

    def enter_lane_from_ring(self, idx, s_from, s_node, forward, lane_pose, phase="A-D"):
        """Run along the ring (off) and turn into a lane start at ``lane_pose``."""
        ring = self.rings[idx]
        best = None
        for d in self._offsets():
            s_turn = s_node - d if forward else s_node + d
            along = ring.forward_distance(s_from, s_turn) if forward else ring.forward_distance(s_turn, s_from)
            if along > ring.length - 1e-6:
                along = 0.0
            L = along + _dubins_len(ring.pose(s_turn, forward), lane_pose, self.r)
            if best is None or L < best[0] - 1e-9:
                best = (L, s_turn, along)
        _, s_turn, along = best
        self.ring_run(idx, s_from, along, forward, False, phase)
        self.dubins_to(lane_pose, phase)

    def join_position(self, idx, s_node, forward, lane_end: Pose) -> float:
        """Ring position where a turn from ``lane_end`` onto the ring lands."""
        ring = self.rings[idx]
        best = None
        for d in self._offsets():
            s_join = s_node + d if forward else s_node - d
            L = _dubins_len(lane_end, ring.pose(s_join, forward), self.r) - d
            if best is None or L < best[0] - 1e-9:
                best = (L, s_join)
        return best[1] % ring.length

    def exit_lane_to_ring(self, idx, s_join, forward, phase="K-A") -> None:
        self.dubins_to(self.rings[idx].pose(s_join, forward), phase)
        self.prims[-1].meta["ring"] = idx  # now travelling on the ring

    # patterns ----------------------------------------------------------
    def cluster_layout(self, ids: list[int], near: int):
        """Ring index, node positions and travel direction for patterns on side ``near``."""
        lanes = [self.grid.lanes[i] for i in ids]
        idxs = {ln.ring[near] for ln in lanes}
        if len(idxs) != 1:
            return None
        idx = idxs.pop()
        ring = self.rings[idx]
        nodes = [ring.project(ln.end(near)) for ln in lanes]
        if len(nodes) == 1:
            return idx, nodes, True
        fwd_span = ring.forward_distance(nodes[0], nodes[-1])
        forward = fwd_span <= ring.length / 2
        # monotone along the chosen direction?
        dist = [ring.forward_distance(nodes[0], s) if forward else ring.forward_distance(s, nodes[0]) for s in nodes]
        if any(b <= a for a, b in zip(dist[:-1], dist[1:])):
            return None
        return idx, nodes, forward

    def pattern_anchors(self, ids: list[int], near: int, layout) -> list[float]:
        """Ring position ``A`` of every lane-pair pattern (where the nearer lane rejoins)."""
        idx, nodes, forward = layout
        lanes = [self.grid.lanes[i] for i in ids]
        out_fwd = near == 0
        return [self.join_position(idx, nodes[k], forward, _lane_pose(lanes[k], not out_fwd, True))
                for k in range(0, len(lanes) - 1, 2)]

    def run_cluster(self, ids: list[int], near: int, layout, first: bool) -> None:
        idx, nodes, forward = layout
        ring = self.rings[idx]
        lanes = [self.grid.lanes[i] for i in ids]
        out_fwd = near == 0  # lane direction when leaving the near side
        anchors = self.pattern_anchors(ids, near, layout)
        start = anchors[0] if anchors else nodes[0]
        pose = self.pose
        if self._current_ring() == idx and abs(float(wrap_angle(ring.pose(ring.project(pose.xy), forward).heading - pose.heading))) < 1e-3:
            s_cur = ring.project(pose.xy)
            dist = ring.forward_distance(s_cur, start) if forward else ring.forward_distance(start, s_cur)
            self.ring_run(idx, s_cur, dist, forward, None, "approach")
        else:
            self.dubins_to(ring.pose(start, forward), "transition")
            self.prims[-1].meta["ring"] = idx
        s_at = start
        for n, k in enumerate(range(0, len(lanes) - 1, 2)):
            near_l, far_l = lanes[k], lanes[k + 1]
            a = anchors[n]
            # A-D: headland (off) to the farther lane, turn in
            self.enter_lane_from_ring(idx, a, nodes[k + 1], forward, _lane_pose(far_l, out_fwd, False))
            self.prims += _lane_prims(far_l, out_fwd, phase="D-E")
            self.dubins_to(_lane_pose(near_l, not out_fwd, False), "E-J")
            self.prims += _lane_prims(near_l, not out_fwd, phase="J-K")
            self.exit_lane_to_ring(idx, a, forward)
            # A-M: spray headland onward to the next pattern's A
            if n + 1 < len(anchors):
                nxt = anchors[n + 1]
                dist = ring.forward_distance(a, nxt) if forward else ring.forward_distance(nxt, a)
                self.ring_run(idx, a, dist, forward, None, "A-M")
                s_at = nxt
            else:
                s_at = a
        if len(lanes) % 2:  # single leftover lane
            lane = lanes[-1]
            self.enter_lane_from_ring(idx, s_at, nodes[-1], forward, _lane_pose(lane, out_fwd, False),
                                      phase="A-D" if len(lanes) > 1 else "transition")
            self.prims += _lane_prims(lane, out_fwd, phase="lane")

    def _current_ring(self) -> int:
        if not self.prims:
            return self.on_ring
        return self.prims[-1].meta.get("ring", -1)

    def close(self, s_e: float) -> None:
        """Spray all remaining ring intervals and finish at the entry."""
        for idx in range(1, len(self.rings)):
            if self.cover[idx].gaps():
                ring = self.rings[idx]
                s, fwd = _best_ring_entry(self.pose, ring, self.r)
                self.dubins_to(ring.pose(s, fwd), "transition")
                self.ring_run(idx, s, ring.length, fwd, None, "closing")
        ring, cov = self.rings[0], self.cover[0]
        pose = self.pose
        if self._current_ring() == 0:
            s = ring.project(pose.xy)
            fwd = abs(float(wrap_angle(ring.pose(s, True).heading - pose.heading))) < math.pi / 2
        else:
            # join where the remaining run to the entry is shortest overall
            best = None
            for fwd in (True, False):
                for g0, g1 in cov.gaps() or [(s_e, s_e)]:
                    for s in (g0, g1):
                        L = _dubins_len(pose, ring.pose(s, fwd), self.r) + self._closing_len(s, s_e, fwd)
                        if best is None or L < best[0]:
                            best = (L, s, fwd)
            _, s, fwd = best
            self.dubins_to(ring.pose(s, fwd), "transition")
        dist = self._closing_len(s, s_e, fwd)
        self.ring_run(0, s, dist, fwd, None, "closing")

    def _closing_len(self, s: float, s_e: float, fwd: bool) -> float:
        ring, cov = self.rings[0], self.cover[0]
        d = ring.forward_distance(s, s_e) if fwd else ring.forward_distance(s_e, s)
        # any gap not on the way must be reached by an extra lap
        for g0, g1 in cov.gaps():
            mid = 0.5 * (g0 + g1)
            off = ring.forward_distance(s, mid) if fwd else ring.forward_distance(mid, s)
            if off > d + 1e-9:
                return d + ring.length
        return d


def plan_m2(grid: LaneGrid, cfg: RunConfig) -> PathPlan:
    """Alternative pattern over lane pairs; falls back to :func:`plan_m1` with
    fewer than two lanes (no pair to interleave)."""
    if len(grid.lanes) < 2:
        plan = plan_m1(grid, cfg)
        plan.method = "M2"
        return plan
    best = None
    for first_side in (0, 1):
        for reverse in (False, True):
            try:
                b = _build_m2(grid, cfg, first_side, reverse)
            except PlanningError:
                continue
            L = Path(b.prims).length
            if best is None or L < best[0] - 1e-6:
                best = (L, b)
    if best is None:
        raise PlanningError("no feasible alternative-pattern plan")
    return _plan_from_prims("M2", best[1].prims, cfg)


def _build_m2(grid: LaneGrid, cfg: RunConfig, first_side: int, reverse: bool) -> _M2Builder:
    b = _M2Builder(grid, cfg)
    ring = grid.headland
    s_e = ring.project(grid.field.entry_point)
    b.prims = []
    remaining = list(range(len(grid.clusters)))
    first = True
    while remaining:
        options = []
        for ci in remaining:
            ids = grid.clusters[ci]
            for near in ((first_side,) if first else (0, 1)):
                for order in ((ids[::-1] if reverse else ids),) if first else (ids, ids[::-1]):
                    lay = b.cluster_layout(order, near)
                    if lay is None:
                        continue
                    idx, nodes, fwd = lay
                    if first:
                        cost = ring.forward_distance(s_e, nodes[0]) if fwd else ring.forward_distance(nodes[0], s_e)
                        cost = cost if idx == 0 else math.inf
                    else:
                        cost = _dubins_len(b.pose, grid.rings[idx].pose(nodes[0], fwd), b.r)
                    options.append((cost, ci, order, near, lay))
        if first and not any(math.isfinite(o[0]) for o in options):
            raise PlanningError("first cluster not reachable along the headland")
        if not options:
            # pattern impossible: serve one cluster as a meander
            ci = remaining[0]
            ids = grid.clusters[ci]
            pose = b.pose
            opts = [(_dubins_len(pose, _lane_pose(grid.lanes[o[0]], f, False), b.r), o, f)
                    for o, f in _cluster_entry_options(grid, ids)]
            _, order, fwd = min(opts, key=lambda t: t[0])
            b.dubins_to(_lane_pose(grid.lanes[order[0]], fwd, False), "transition")
            b.prims += _serpentine(grid, order, fwd, b.r)
            remaining.remove(ci)
            first = False
            continue
        options.sort(key=lambda o: o[0])
        _, ci, order, near, lay = options[0]
        if first:
            idx, nodes, fwd = lay
            b.start = ring.pose(s_e, fwd)
            b.on_ring = 0
        b.run_cluster(order, near, lay, first)
        remaining.remove(ci)
        first = False
    b.close(s_e)
    return b


def plan(grid: LaneGrid, cfg: RunConfig, method: str | None = None) -> PathPlan:
    method = method or cfg.method
    if method == "M1":
        return plan_m1(grid, cfg)
    if method == "M2":
        return plan_m2(grid, cfg)
    raise ValueError(f"unknown method {method!r}")


def lane_priority(grid: LaneGrid, plan: PathPlan) -> list[int]:
    """Lane ids sorted by accumulated absolute heading change along each lane
    (straighter lanes first, ties by lane id)."""
    dh = np.abs(plan.dheading)
    totals = {ln.id: 0.0 for ln in grid.lanes}
    mask = plan.lane_id >= 0
    for lid, d in zip(plan.lane_id[mask], dh[mask]):
        totals[int(lid)] = totals.get(int(lid), 0.0) + float(d)
    return sorted(totals, key=lambda lid: (totals[lid], lid))


def priority_from_curvature(curvature: dict[int, float]) -> list[int]:
    """Same ordering rule as :func:`lane_priority` from precomputed totals."""
    return sorted(curvature, key=lambda lid: (curvature[lid], lid))
