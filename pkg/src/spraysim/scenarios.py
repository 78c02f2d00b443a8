"""Scripted single-path scenarios: a straight lane, a 90 degree turn and a
serpentine, plus the overlap-filter comparison run on the serpentine.

The serpentine uses U-turns tighter than half the working width, so the inner
boom sections sweep back over area they have just sprayed; this is where the
occupancy-grid and polygon overlap filters differ. Scenario paths are sampled
per primitive so that no sampling step straddles a line/arc joint.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass

import numpy as np

from .field_io import RunConfig
from .paths import Arc, Line, Path, with_meta, wrap_angle
from .planner import PathPlan
from .raster import Grid, rasterize
from .simulator import SprayMap, build_cells
from .switching import OccupancyTracker, layout_for, section_velocities
from .geometry import SprayedPolygonState

SCENARIO_CONFIG = RunConfig(working_width=24.0, nozzle_spacing=0.5, min_turn_radius=5.0, sample_spacing=1.0)
SCENARIOS = ("straight", "turn90", "serpentine")


def _line(p0, p1) -> Line:
    return Line(np.asarray(p0, dtype=float), np.asarray(p1, dtype=float))


def scenario_prims(name: str, cfg: RunConfig = SCENARIO_CONFIG, spacing: float | None = None) -> list:
    """Path primitives of a scripted scenario, starting at the origin heading east."""
    r = cfg.min_turn_radius
    if name == "straight":
        prims = [_line((0, 0), (50, 0))]
    elif name == "turn90":
        # east, left quarter turn, north
        prims = [_line((0, 0), (30, 0)), Arc(np.array([30.0, r]), r, -math.pi / 2, math.pi / 2),
                 _line((30 + r, r), (30 + r, r + 30))]
    elif name == "serpentine":
        # three passes spaced one working width apart (or ``spacing``),
        # joined by U-turns made of two quarter arcs and a straight
        W, length = (spacing or cfg.working_width), 40.0
        gap = W - 2 * r
        prims = []
        y = 0.0
        for k in range(3):
            east = k % 2 == 0
            x0, x1 = (0.0, length) if east else (length, 0.0)
            prims.append(_line((x0, y), (x1, y)))
            if k == 2:
                break
            if east:  # right turn at the east end
                prims += [Arc(np.array([length, y - r]), r, math.pi / 2, -math.pi / 2),
                          _line((length + r, y - r), (length + r, y - r - gap)),
                          Arc(np.array([length, y - r - gap]), r, 0.0, -math.pi / 2)]
            else:  # left turn at the west end
                prims += [Arc(np.array([0.0, y - r]), r, math.pi / 2, math.pi / 2),
                          _line((-r, y - r), (-r, y - r - gap)),
                          Arc(np.array([0.0, y - r - gap]), r, math.pi, math.pi / 2)]
            y -= W
    else:
        raise ValueError(f"unknown scenario {name!r}")
    return with_meta(prims, kind="lane", spray=True, phase="D-E")


def plan_from_prims_aligned(prims: list, cfg: RunConfig, method: str = "M1") -> PathPlan:
    """Sample every primitive on its own (about ``sample_spacing`` apart) so
    that primitive joints fall on samples; no step straddles a line/arc
    transition. The yaw rate uses each step's own arc length."""
    path = Path(prims)
    s_all = [np.zeros(1)]
    for i, prim in enumerate(path.prims):
        n = max(1, int(round(prim.length / cfg.sample_spacing)))
        s_all.append(path.cum[i] + np.linspace(0.0, prim.length, n + 1)[1:])
    s = np.concatenate(s_all)
    pts, hdg = path.at(s)
    metas = path.meta_at(0.5 * (s[:-1] + s[1:]))
    step = np.diff(s)
    dh = wrap_angle(np.diff(hdg))
    # headings are exact tangents, so straight steps have zero change
    hdg = np.asarray(wrap_angle(hdg), dtype=float)
    return PathPlan(
        method=method, xy=pts, heading=hdg, yaw_rate=dh * cfg.v_ref / step,
        kind=np.array([m.get("kind", "transition") for m in metas], dtype=object),
        lane_id=np.array([m.get("lane_id", -1) for m in metas], dtype=int),
        spray=np.array([bool(m.get("spray", False)) for m in metas]),
        ring=np.array([m.get("ring", -1) for m in metas], dtype=int),
        phase=np.array([m.get("phase", "") for m in metas], dtype=object),
        ds=float(path.length / len(step)), v_ref=cfg.v_ref, prims=prims,
    )


def scenario_plan(name: str, cfg: RunConfig = SCENARIO_CONFIG, spacing: float | None = None) -> PathPlan:
    return plan_from_prims_aligned(scenario_prims(name, cfg, spacing), cfg)


# --------------------------------------------------------------------------
# candidate cells and overlap filters


def candidate_cells(plan: PathPlan, cfg: RunConfig, forward_only: bool = False):
    """Cells every section would spray without any overlap filter.

    Returns the cell batch and a boolean mask of candidate cells: every
    non-degenerate cell, or with ``forward_only`` only sections that do not
    move backwards (the velocity-following flow law shuts those off).
    """
    layout = layout_for(cfg, "multi")
    cells = build_cells(plan, layout)
    mask = cells.valid.copy()
    if forward_only:
        v = section_velocities(cfg.v_ref, plan.yaw_rate, layout).reshape(-1)
        mask &= v >= 0
    return cells, mask


def filter_grid(cells, sprayable: np.ndarray, d_G: float) -> np.ndarray:
    """Occupancy-grid filter applied step by step; returns the kept mask."""
    tracker = OccupancyTracker(d_G)
    S = cells.n_sections
    kept = np.zeros(len(sprayable), dtype=bool)
    for k in range(len(cells.d)):
        sl = slice(k * S, (k + 1) * S)
        cand = np.flatnonzero(sprayable[sl]) + k * S
        # decisions of one step are made against earlier steps only
        keep = [i for i in cand if not tracker.near(cells.centroid[i])]
        for i in keep:
            tracker.add(cells.centroid[i])
        kept[keep] = True
    return kept


def filter_polygon(cells, sprayable: np.ndarray, window: int | None = 10) -> np.ndarray:
    """Sprayed-polygon filter (centroid test against the recent union)."""
    state = SprayedPolygonState(window)
    S = cells.n_sections
    kept = np.zeros(len(sprayable), dtype=bool)
    for k in range(len(cells.d)):
        sl = slice(k * S, (k + 1) * S)
        cand = np.flatnonzero(sprayable[sl]) + k * S
        hit = state.contains_many(cells.centroid[cand])
        keep = cand[~hit]
        state.add_step(cells.quads[keep])
        kept[keep] = True
    return kept


@dataclass
class FilterResult:
    variant: str
    d_G: float | None
    kept_cells: int
    swath_area: float
    covered_area: float
    gap_area: float
    overlap_area: float
    quads: np.ndarray

    @property
    def gap_pct(self) -> float:
        return 100.0 * self.gap_area / self.swath_area


def _measure(quads, swath_quads, res: float, grid: Grid):
    _, img, _ = rasterize(quads, None, res=res, grid=grid, return_counts=True)
    _, swath, _ = rasterize(swath_quads, None, res=res, grid=grid, return_counts=True)
    px = res * res
    inside = swath > 0
    covered = img > 0
    return (float(np.count_nonzero(inside)) * px, float(np.count_nonzero(covered)) * px,
            float(np.count_nonzero(inside & ~covered)) * px, float(np.count_nonzero(img >= 2)) * px)


def compare_overlap_filters(d_G_values=(0.5, 0.25, 0.125), cfg: RunConfig = SCENARIO_CONFIG, res: float = 0.02,
             window: int | None = None, spacing: float | None = None) -> list[FilterResult]:
    """Serpentine scenario under grid filtering at each ``d_G`` and under the
    polygon filter. Gap is swath area (union of all candidate cells) left
    uncovered; overlap is area covered by two or more kept cells.

    The polygon keeps the whole sprayed history by default (``window=None``):
    a U-turn spans more sampling steps than the short window used in field
    runs."""
    plan = scenario_plan("serpentine", cfg, spacing)
    cells, sprayable = candidate_cells(plan, cfg)
    swath = cells.quads[sprayable]
    grid = Grid.around(swath.reshape(-1, 2), res)
    variants = [("grid", float(d), filter_grid(cells, sprayable, float(d))) for d in d_G_values]
    variants.append(("polygon", None, filter_polygon(cells, sprayable, window)))
    out = []
    for name, d, kept in variants:
        q = cells.quads[kept]
        sw, cov, gap, ov = _measure(q, swath, res, grid)
        out.append(FilterResult(name, d, int(kept.sum()), sw, cov, gap, ov, q))
    return out


def filter_comparison_csv(results: list[FilterResult]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["variant", "d_G", "kept_cells", "swath_area_m2", "gap_area_m2", "overlap_area_m2", "gap_pct"])
    for r in results:
        w.writerow([r.variant, "" if r.d_G is None else f"{r.d_G:g}", r.kept_cells, f"{r.swath_area:.4f}",
                    f"{r.gap_area:.4f}", f"{r.overlap_area:.4f}", f"{r.gap_pct:.4f}"])
    return buf.getvalue()


def scenario_map(name: str, cfg: RunConfig = SCENARIO_CONFIG) -> SprayMap:
    """Unfiltered spray map of a scripted scenario (every sprayable cell kept)."""
    plan = scenario_plan(name, cfg)
    cells, sprayable = candidate_cells(plan, cfg)
    layout = layout_for(cfg, "multi")
    sel = np.flatnonzero(sprayable)
    return SprayMap(
        quads=cells.quads[sel], area=cells.area[sel], volume=np.zeros(len(sel)),
        kind=np.where(cells.straight[sel], "straight", "wedge").astype(object),
        section_index=layout.indices[cells.col[sel]], step=cells.step[sel],
        s_ref=cfg.s_volume_ref, path_xy=plan.xy,
    )


__all__ = [
    "SCENARIOS", "SCENARIO_CONFIG", "scenario_prims", "scenario_plan", "candidate_cells",
    "filter_grid", "filter_polygon", "compare_overlap_filters", "filter_comparison_csv", "FilterResult", "scenario_map",
]
