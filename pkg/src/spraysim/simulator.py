"""Sample-by-sample spray simulation over a path plan.

For every step ``k -> k+1`` each boom section sweeps a quadrilateral cell
joining its boundary points at both samples (the boom is orthogonal to the
heading at each sample). Cells of steps without heading change are
rectangles of area ``d*w`` ("straight"); the others are "wedge" cells.
Applied volume of an active section is ``f_i * dt`` with ``dt = d / v_ref``.
"""

from __future__ import annotations

import csv
import io
import itertools
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np
import shapely

from .field_io import FieldSpec, RunConfig
from .geometry import MIN_CELL_AREA, convexify_quads, points_in_polygon, polygon_area_many, quads_contain
from .planner import LaneGrid, PathPlan, build_lane_grid, plan_m1, plan_m2
from .raster import Grid, field_mask_bands, rasterize
from .switching import (
    SectionLayout,
    block_state_m2,
    layout_for,
    nominal_flows,
    section_velocities,
)

log = logging.getLogger(__name__)

METRIC_RES = 0.05
POLYGON_WINDOW = 10
MODES = ("one", "two", "multi")


class SimulationError(RuntimeError):
    pass


# --------------------------------------------------------------------------
# candidate cells


@dataclass
class CellBatch:
    """All candidate cells of a plan, ``n_steps x n_sections`` in step-major order."""

    quads: np.ndarray  # (M, 4, 2) counter-clockwise, convex
    area: np.ndarray
    straight: np.ndarray
    step: np.ndarray
    col: np.ndarray
    centroid: np.ndarray
    d: np.ndarray  # per-step chord length
    n_sections: int

    @property
    def valid(self) -> np.ndarray:
        return self.straight | (self.area >= MIN_CELL_AREA)


def build_cells(plan: PathPlan, layout: SectionLayout) -> CellBatch:
    xy, hd = plan.xy, plan.heading
    n = plan.n_steps
    S = layout.n_total
    normal = np.stack([np.sin(hd), -np.cos(hd)], axis=1)  # right-hand normal
    bpts = xy[:, None, :] + layout.boundaries[None, :, None] * normal[:, None, :]  # (n+1, S+1, 2)
    q = np.empty((n, S, 4, 2))
    q[:, :, 0] = bpts[:-1, :-1]
    q[:, :, 1] = bpts[:-1, 1:]
    q[:, :, 2] = bpts[1:, 1:]
    q[:, :, 3] = bpts[1:, :-1]
    straight_step = np.diff(hd) == 0
    q = q.reshape(n * S, 4, 2)
    straight = np.repeat(straight_step, S)
    wedge = ~straight
    if wedge.any():
        q[wedge] = convexify_quads(q[wedge])
    area = polygon_area_many(q)
    # centroid of each (convex) quad via triangle fan
    a, b, c, dq = q[:, 0], q[:, 1], q[:, 2], q[:, 3]
    t1 = 0.5 * np.abs((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1]) - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))
    t2 = 0.5 * np.abs((c[:, 0] - a[:, 0]) * (dq[:, 1] - a[:, 1]) - (c[:, 1] - a[:, 1]) * (dq[:, 0] - a[:, 0]))
    tot = t1 + t2
    g1 = (a + b + c) / 3
    g2 = (a + c + dq) / 3
    cent = np.where(tot[:, None] > 0, (g1 * t1[:, None] + g2 * t2[:, None]) / np.where(tot > 0, tot, 1)[:, None], q.mean(axis=1))
    d = np.hypot(*np.diff(xy, axis=0).T)
    return CellBatch(
        quads=q,
        area=area,
        straight=straight,
        step=np.repeat(np.arange(n), S),
        col=np.tile(np.arange(S), n),
        centroid=cent,
        d=d,
        n_sections=S,
    )


@dataclass
class Containment:
    """For every cell, earlier-step cells containing its centroid (CSR)."""

    ptr: np.ndarray
    idx: np.ndarray
    owner: np.ndarray
    lag: np.ndarray  # step difference of each entry


def containment(cells: CellBatch, bucket: float = 2.0, chunk: int = 400_000) -> Containment:
    """Centroid-in-earlier-cell relation via grid buckets and a vectorised
    convex containment test."""
    q = cells.quads
    M = len(q)
    lo = q.min(axis=1)
    hi = q.max(axis=1)
    origin = np.minimum(lo.min(axis=0), cells.centroid.min(axis=0)) - bucket
    i0 = np.floor((lo - origin) / bucket).astype(np.int64)
    i1 = np.floor((hi - origin) / bucket).astype(np.int64)
    nxs = i1[:, 0] - i0[:, 0] + 1
    nys = i1[:, 1] - i0[:, 1] + 1
    counts = nxs * nys
    rep = np.repeat(np.arange(M), counts)
    local = np.arange(rep.size) - np.repeat(np.cumsum(counts) - counts, counts)
    bx = i0[rep, 0] + local % nxs[rep]
    by = i0[rep, 1] + local // nxs[rep]
    ky = int(max(by.max(), np.floor((cells.centroid[:, 1] - origin[1]) / bucket).max())) + 2
    key = bx * ky + by
    order = np.argsort(key, kind="stable")
    key_s, cell_s = key[order], rep[order]
    cb = np.floor((cells.centroid - origin) / bucket).astype(np.int64)
    ckey = cb[:, 0] * ky + cb[:, 1]
    start = np.searchsorted(key_s, ckey, side="left")
    stop = np.searchsorted(key_s, ckey, side="right")
    cnt = stop - start
    owners, hits = [], []
    cum = np.cumsum(cnt)
    a = 0
    while a < M:
        base = cum[a - 1] if a else 0
        b = max(int(np.searchsorted(cum, base + chunk, side="right")), a + 1)
        c = cnt[a:b]
        own = np.repeat(np.arange(a, b), c)
        off = np.arange(own.size) - np.repeat(np.cumsum(c) - c, c)
        cand = cell_s[start[own] + off]
        earlier = cells.step[cand] < cells.step[own]
        own, cand = own[earlier], cand[earlier]
        if own.size:
            inside = quads_contain(q[cand], cells.centroid[own])
            owners.append(own[inside])
            hits.append(cand[inside])
        a = b
    owner = np.concatenate(owners) if owners else np.zeros(0, dtype=np.int64)
    idx = np.concatenate(hits) if hits else np.zeros(0, dtype=np.int64)
    srt = np.argsort(owner, kind="stable")
    owner, idx = owner[srt], idx[srt]
    ptr = np.searchsorted(owner, np.arange(M + 1))
    return Containment(ptr=ptr, idx=idx, owner=owner, lag=cells.step[owner] - cells.step[idx])


# --------------------------------------------------------------------------
# spray map and metrics


@dataclass
class SprayMap:
    quads: np.ndarray
    area: np.ndarray
    volume: np.ndarray  # litres
    kind: np.ndarray  # "straight" | "wedge"
    section_index: np.ndarray
    step: np.ndarray
    s_ref: float
    path_xy: np.ndarray | None = None
    overlap_count: np.ndarray | None = None

    def __len__(self) -> int:
        return len(self.area)

    @property
    def applied_rate(self) -> np.ndarray:
        """Litres per hectare on each cell."""
        return self.volume / (self.area / 10000.0)

    @property
    def total_volume(self) -> float:
        return float(self.volume.sum())

    @classmethod
    def empty(cls, s_ref: float) -> "SprayMap":
        z = np.zeros(0)
        return cls(np.zeros((0, 4, 2)), z, z, np.zeros(0, dtype=object), np.zeros(0, dtype=int), np.zeros(0, dtype=int), s_ref)

    def merged(self, other: "SprayMap") -> "SprayMap":
        cat = np.concatenate
        return SprayMap(cat([self.quads, other.quads]), cat([self.area, other.area]), cat([self.volume, other.volume]),
                        cat([self.kind, other.kind]), cat([self.section_index, other.section_index]),
                        cat([self.step, other.step]), self.s_ref)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["step", "section", "kind", "x1", "y1", "x2", "y2", "x3", "y3", "x4", "y4", "area_m2", "volume_l", "applied_rate"])
        rate = self.applied_rate
        for i in range(len(self)):
            c = self.quads[i].ravel()
            w.writerow([int(self.step[i]), int(self.section_index[i]), self.kind[i], *(f"{v:.4f}" for v in c),
                        f"{self.area[i]:.6f}", f"{self.volume[i]:.9f}", f"{rate[i]:.4f}"])
        return buf.getvalue()


@dataclass
class CoverageMetrics:
    S: float
    S_field_ref: float
    dS_m: float
    dS_pct: float
    gap_area: float
    overlap_area: float
    L: float
    field_area: float = 0.0
    method: str = ""
    mode: str = ""
    field_id: str = ""


def merge_strips(spray: SprayMap) -> np.ndarray:
    """Quads with consecutive straight cells of one section fused into strips.

    Consecutive straight cells share an exact edge, so the fused rectangle
    covers the same points; this only shrinks the rasterisation work.
    """
    n = len(spray)
    if n == 0:
        return np.zeros((0, 4, 2))
    order = np.lexsort((spray.step, spray.section_index))
    q = spray.quads[order]
    st = spray.step[order]
    sec = spray.section_index[order]
    straight = spray.kind[order] == "straight"
    link = (
        (sec[1:] == sec[:-1]) & (st[1:] == st[:-1] + 1) & straight[1:] & straight[:-1]
        & np.all(q[1:, 0] == q[:-1, 3], axis=1) & np.all(q[1:, 1] == q[:-1, 2], axis=1)
    )
    starts = np.flatnonzero(np.concatenate([[True], ~link]))
    ends = np.concatenate([starts[1:] - 1, [n - 1]])
    out = np.empty((len(starts), 4, 2))
    out[:, 0] = q[starts, 0]
    out[:, 1] = q[starts, 1]
    out[:, 2] = q[ends, 2]
    out[:, 3] = q[ends, 3]
    return out


def field_frame(field: FieldSpec) -> np.ndarray:
    """Rotation taking the longest contour edge onto the x axis."""
    from .planner import _longest_edge_direction

    u = _longest_edge_direction(field.contour)
    return np.array([[u[0], u[1]], [-u[1], u[0]]])


_MASK_CACHE: dict = {}


def _field_raster(field: FieldSpec, res: float):
    key = (field.id, field.contour.tobytes(), tuple(o.tobytes() for o in field.obstacles), res)
    hit = _MASK_CACHE.get(key)
    if hit is None:
        R = field_frame(field)
        rings = [field.contour @ R.T] + [o @ R.T for o in field.obstacles]
        grid = Grid.around(rings[0], res, pad=2 * res)
        hit = (R, rings, grid, field_mask_bands(rings, grid))
        _MASK_CACHE.clear()  # keep one field resident
        _MASK_CACHE[key] = hit
    return hit


def coverage_metrics(spray: SprayMap, field: FieldSpec, L: float = float("nan"), res: float = METRIC_RES,
                     method: str = "", mode: str = "") -> CoverageMetrics:
    """Volumes plus gap/overlap areas by rasterisation inside the field.

    Rasterisation happens in a frame aligned with the longest contour edge
    (the lane direction), where straight strips span few pixel rows.
    """
    S = spray.total_volume
    S_ref = field.area_ha * spray.s_ref
    R, rings, grid, mask = _field_raster(field, res)
    quads = merge_strips(spray) @ R.T
    r = rasterize(quads, rings, res=res, grid=grid, mask=mask)
    dS = S - S_ref
    return CoverageMetrics(
        S=S, S_field_ref=S_ref, dS_m=dS, dS_pct=100.0 * dS / S_ref if S_ref else float("nan"),
        gap_area=r.gap_area, overlap_area=r.overlap_area, L=L, field_area=field.area_m2,
        method=method, mode=mode, field_id=field.id,
    )


# --------------------------------------------------------------------------
# simulation


@dataclass
class Prepared:
    """Mode-independent per-plan data, shared by the three section setups."""

    plan: PathPlan
    layout: SectionLayout
    cells: CellBatch
    rel: Containment
    infield: np.ndarray
    inmain: np.ndarray  # centroid inside the mainfield (beyond the intersection line)


def prepare(field: FieldSpec, plan: PathPlan, cfg: RunConfig, grid: LaneGrid | None = None) -> Prepared:
    layout = layout_for(cfg, "multi")
    cells = build_cells(plan, layout)
    rel = containment(cells)
    infield = points_in_polygon(cells.centroid, field.contour, field.obstacles)
    grid = grid or build_lane_grid(field, cfg)
    inmain = shapely.contains_xy(grid.mainfield, cells.centroid[:, 0], cells.centroid[:, 1])
    return Prepared(plan, layout, cells, rel, infield, inmain)


def simulate(field: FieldSpec, plan: PathPlan, cfg: RunConfig, mode: str | None = None,
             prepared: Prepared | None = None, window: int = POLYGON_WINDOW) -> tuple[SprayMap, CoverageMetrics]:
    """Run one section setup over ``plan`` and return the spray map and metrics."""
    spray = simulate_map(field, plan, cfg, mode, prepared, window)
    mode = mode or cfg.section_mode
    return spray, coverage_metrics(spray, field, plan.length, method=plan.method, mode=mode)


def simulate_map(field: FieldSpec, plan: PathPlan, cfg: RunConfig, mode: str | None = None,
                 prepared: Prepared | None = None, window: int = POLYGON_WINDOW) -> SprayMap:
    mode = mode or cfg.section_mode
    if plan.v_ref != cfg.v_ref or abs(plan.ds - cfg.sample_spacing) > 0.5 * cfg.sample_spacing:
        raise SimulationError("plan was built with a different configuration")
    if plan.n_steps == 0:
        raise SimulationError("plan has no steps")
    pre = prepared or prepare(field, plan, cfg)
    if pre.plan is not plan:
        raise SimulationError("prepared data belongs to another plan")
    layout = layout_for(cfg, mode)
    cells, rel = pre.cells, pre.rel
    S = layout.n_total
    n = plan.n_steps
    v = section_velocities(cfg.v_ref, plan.yaw_rate, layout)  # (n, S)
    flows = nominal_flows(v, cfg.s_volume_ref, layout.w, mode=mode, v_ref=cfg.v_ref)
    dt = cells.d / cfg.v_ref
    valid = cells.valid.reshape(n, S)
    infield = pre.infield.reshape(n, S)
    inmain = pre.inmain.reshape(n, S)
    recent = rel.lag <= window
    kept = np.zeros(n * S, dtype=bool)
    groups = layout.groups
    ng = layout.n_groups
    predictive = plan.method == "M2"
    for k in range(n):
        if not plan.spray[k]:
            if predictive:
                block_state_m2(k, plan)  # label consistency
            continue
        a, b = k * S, (k + 1) * S
        p0, p1 = rel.ptr[a], rel.ptr[b]
        own = rel.owner[p0:p1] - a
        hit_all = kept[rel.idx[p0:p1]]
        sprayed_g = np.bincount(own, weights=hit_all, minlength=S) > 0
        if mode == "multi":
            on = infield[k] & ~sprayed_g
        elif predictive:
            block_state_m2(k, plan)
            if plan.kind[k] == "headland":
                sprayed_w = np.bincount(own, weights=hit_all & recent[p0:p1], minlength=S) > 0
                need = infield[k] & ~sprayed_w
                on = (np.bincount(groups, weights=need, minlength=ng) > 0)[groups]
            else:
                # lane steps: a group opens once any of its sections has
                # crossed the intersection line into the mainfield
                on = (np.bincount(groups, weights=inmain[k], minlength=ng) > 0)[groups]
        else:
            need = infield[k] & ~sprayed_g
            on = (np.bincount(groups, weights=need, minlength=ng) > 0)[groups]
        on &= valid[k] & (flows[k] > 0)
        kept[a:b] = on
    sel = np.flatnonzero(kept)
    step = cells.step[sel]
    vol = flows.reshape(-1)[sel] * dt[step]
    kind = np.where(cells.straight[sel], "straight", "wedge").astype(object)
    return SprayMap(
        quads=cells.quads[sel],
        area=cells.area[sel],
        volume=vol,
        kind=kind,
        section_index=layout.indices[cells.col[sel]],
        step=step,
        s_ref=cfg.s_volume_ref,
        path_xy=plan.xy,
    )


def expected_volume(plan: PathPlan, cfg: RunConfig, spray: SprayMap, mode: str) -> float:
    """Independent per-step sum of ``f_i * dt`` over active sections."""
    layout = layout_for(cfg, mode)
    total = 0.0
    d = np.hypot(*np.diff(plan.xy, axis=0).T)
    for k in np.unique(spray.step):
        secs = spray.section_index[spray.step == k]
        cols = np.searchsorted(layout.indices, secs)
        v = section_velocities(cfg.v_ref, plan.yaw_rate[k], layout)
        f = nominal_flows(v, cfg.s_volume_ref, layout.w, mode=mode, v_ref=cfg.v_ref)
        total += float(np.sum(f[cols])) * d[k] / cfg.v_ref
    return total


# --------------------------------------------------------------------------
# six-setup matrix


@dataclass
class MatrixResult:
    field: FieldSpec
    grid: LaneGrid
    plans: dict
    maps: dict = field(default_factory=dict)
    metrics: dict = field(default_factory=dict)

    def rows(self) -> list[CoverageMetrics]:
        return [self.metrics[(m, s)] for m in ("M1", "M2") for s in MODES if (m, s) in self.metrics]


def run_matrix(field: FieldSpec, cfg_base: RunConfig, setups=None, keep_maps: bool = True) -> MatrixResult:
    """Simulate M1/M2 x {one, two, multi}; path lengths are shared per method."""
    setups = list(setups or itertools.product(("M1", "M2"), MODES))
    grid = build_lane_grid(field, cfg_base)
    methods = sorted({m for m, _ in setups})
    plans = {}
    for m in methods:
        plans[m] = plan_m1(grid, cfg_base) if m == "M1" else plan_m2(grid, cfg_base)
    res = MatrixResult(field, grid, plans)
    for m in methods:
        pre = prepare(field, plans[m], cfg_base, grid)
        for meth, mode in setups:
            if meth != m:
                continue
            cfg = replace(cfg_base, method=m, section_mode=mode)
            spray, met = simulate(field, plans[m], cfg, mode, prepared=pre)
            met.field_id = field.id
            res.metrics[(m, mode)] = met
            if keep_maps:
                res.maps[(m, mode)] = spray
        del pre
    return res


def _run_one(args):
    field, cfg, setups, keep = args
    return run_matrix(field, cfg, setups, keep)


def run_batch(fields, cfg: RunConfig, setups=None, workers: int = 1, keep_maps: bool = True) -> list:
    """Run several fields, fanning out to at most ``workers`` processes.

    Exceptions are returned in place of results so one failing field does
    not abort the batch.
    """
    jobs = [(f, cfg, setups, keep_maps) for f in fields]
    out = []
    if workers <= 1 or len(jobs) <= 1:
        for j in jobs:
            try:
                out.append(_run_one(j))
            except Exception as exc:  # noqa: BLE001 - reported per field
                out.append(exc)
        return out
    with ProcessPoolExecutor(max_workers=workers) as ex:
        futs = [ex.submit(_run_one, j) for j in jobs]
        for f in futs:
            try:
                out.append(f.result())
            except Exception as exc:  # noqa: BLE001
                out.append(exc)
    return out
