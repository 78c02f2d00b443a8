"""Scanline rasterisation of convex cells and field polygons.

Pixels are sampled at their centres. A convex cell covers the pixels whose
centre lies in ``[x_left, x_right)`` of its scanline interval; cells sharing
an edge therefore never double count. Work proceeds in horizontal bands to
bound memory.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

BAND_ROWS = 400
CHUNK_ROWS = 2_000_000


@dataclass(frozen=True)
class Grid:
    x0: float
    y0: float
    res: float
    nx: int
    ny: int

    @classmethod
    def around(cls, pts: np.ndarray, res: float, pad: float = 1.0) -> "Grid":
        lo = pts.min(axis=0) - pad
        hi = pts.max(axis=0) + pad
        lo = np.floor(lo / res) * res
        nx = int(np.ceil((hi[0] - lo[0]) / res))
        ny = int(np.ceil((hi[1] - lo[1]) / res))
        return cls(float(lo[0]), float(lo[1]), res, nx, ny)

    def row_of(self, y) -> np.ndarray:
        """First row whose centre is >= y."""
        return np.ceil((np.asarray(y) - self.y0) / self.res - 0.5).astype(np.int64)

    def col_of(self, x) -> np.ndarray:
        return np.ceil((np.asarray(x) - self.x0) / self.res - 0.5).astype(np.int64)

    def row_y(self, rows) -> np.ndarray:
        return self.y0 + (np.asarray(rows) + 0.5) * self.res


def _quad_spans(quads: np.ndarray, grid: Grid, r0: int, r1: int):
    """Yield ``(row, c0, c1)`` scanline spans of convex quads within rows [r0, r1)."""
    if len(quads) == 0:
        return
    ymin = quads[..., 1].min(axis=1)
    ymax = quads[..., 1].max(axis=1)
    ra = np.maximum(grid.row_of(ymin), r0)
    rb = np.minimum(grid.row_of(ymax), r1)
    n = np.maximum(rb - ra, 0)
    if int(n.sum()) == 0:
        return
    # per-edge parameters from canonically ordered endpoints (lower y first),
    # so an edge shared by two cells yields bit-identical crossings in both
    a = quads
    b = np.roll(quads, -1, axis=1)
    swap = (b[..., 1] < a[..., 1])[..., None]
    p = np.where(swap, b, a)
    q = np.where(swap, a, b)
    ylo = p[..., 1]
    dy = q[..., 1] - p[..., 1]
    flat = dy == 0
    slope = np.where(flat, 0.0, (q[..., 0] - p[..., 0]) / np.where(flat, 1.0, dy))
    px0 = p[..., 0]
    yhi = np.where(flat, -np.inf, q[..., 1])
    cum = np.cumsum(n)
    start = 0
    while start < len(quads):
        base = cum[start - 1] if start else 0
        stop = max(int(np.searchsorted(cum, base + CHUNK_ROWS, side="right")), start + 1)
        cnt = n[start:stop]
        if cnt.sum():
            qi = np.repeat(np.arange(start, stop), cnt)
            local = np.arange(qi.size) - np.repeat(np.cumsum(cnt) - cnt, cnt)
            rows = ra[qi] + local
            yy = grid.row_y(rows)[:, None]
            cross = (ylo[qi] <= yy) & (yy < yhi[qi])
            x = px0[qi] + (yy - ylo[qi]) * slope[qi]
            xl = np.where(cross, x, np.inf).min(axis=1)
            xr = np.where(cross, x, -np.inf).max(axis=1)
            ok = xr > xl
            yield rows[ok], grid.col_of(xl[ok]), grid.col_of(xr[ok])
        start = stop


def _ring_crossings(rings, grid: Grid, r0: int, r1: int):
    """Columns where polygon edges cross each pixel-row centre line."""
    out_r, out_c = [], []
    for ring in rings:
        a = np.asarray(ring, dtype=float)
        b = np.roll(a, -1, axis=0)
        for (ax, ay), (bx, by) in zip(a, b):
            if ay == by:
                continue
            lo, hi = (ay, by) if ay < by else (by, ay)
            ra = max(int(grid.row_of(lo)), r0)
            rb = min(int(grid.row_of(hi)), r1)
            if rb <= ra:
                continue
            rows = np.arange(ra, rb)
            yc = grid.row_y(rows)
            x = ax + (yc - ay) * (bx - ax) / (by - ay)
            out_r.append(rows)
            out_c.append(grid.col_of(x))
    if not out_r:
        return np.zeros(0, dtype=np.int64), np.zeros(0, dtype=np.int64)
    return np.concatenate(out_r), np.concatenate(out_c)


def _accumulate(diff: np.ndarray, rows, c0, c1, r0: int, nx: int):
    w = nx + 1
    c0 = np.clip(c0, 0, nx)
    c1 = np.clip(c1, 0, nx)
    idx_a = (rows - r0) * w + c0
    idx_b = (rows - r0) * w + c1
    size = diff.size
    ev = np.bincount(idx_a, minlength=size)[:size] - np.bincount(idx_b, minlength=size)[:size]
    diff += ev.reshape(diff.shape).astype(diff.dtype, copy=False)


@dataclass
class CoverageRaster:
    """Pixel counts summarised over a field mask."""

    res: float
    field_px: int
    gap_px: int
    overlap_px: int
    covered_px: int
    union_px: int
    outside_px: int

    @property
    def px_area(self) -> float:
        return self.res * self.res

    @property
    def field_area(self) -> float:
        return self.field_px * self.px_area

    @property
    def gap_area(self) -> float:
        return self.gap_px * self.px_area

    @property
    def overlap_area(self) -> float:
        return self.overlap_px * self.px_area

    @property
    def union_area(self) -> float:
        return self.union_px * self.px_area


def field_mask_bands(rings, grid: Grid) -> list[np.ndarray]:
    """Even-odd inside mask of ``rings`` per band of :data:`BAND_ROWS` rows."""
    out = []
    for r0 in range(0, grid.ny, BAND_ROWS):
        r1 = min(grid.ny, r0 + BAND_ROWS)
        fdiff = np.zeros((r1 - r0, grid.nx + 1), dtype=np.int16)
        rr, cc = _ring_crossings(rings, grid, r0, r1)
        if rr.size:
            np.add.at(fdiff, (rr - r0, np.clip(cc, 0, grid.nx)), 1)
        out.append((np.cumsum(fdiff, axis=1, dtype=np.int16)[:, : grid.nx] & 1).astype(bool))
    return out


def rasterize(quads, rings=None, res: float = 0.05, grid: Grid | None = None, return_counts: bool = False,
              mask: list | None = None):
    """Count how many cells cover each pixel.

    ``rings`` (outer ring plus hole rings, even-odd) defines the field mask
    used for gap/overlap statistics. With ``return_counts`` the full count
    image is returned as well (only sensible for small scenes).
    """
    quads = np.asarray(quads, dtype=float).reshape(-1, 4, 2)
    pts = [quads.reshape(-1, 2)] if len(quads) else []
    if rings:
        pts += [np.asarray(r, dtype=float) for r in rings]
    if grid is None:
        grid = Grid.around(np.concatenate(pts), res)
    order = np.argsort(quads[..., 1].min(axis=1), kind="stable") if len(quads) else np.zeros(0, int)
    quads = quads[order]
    ymin = quads[..., 1].min(axis=1) if len(quads) else np.zeros(0)
    ymax_run = np.maximum.accumulate(quads[..., 1].max(axis=1)) if len(quads) else np.zeros(0)
    if rings and mask is None:
        mask = field_mask_bands(rings, grid)
    stats = dict(field_px=0, gap_px=0, overlap_px=0, covered_px=0, union_px=0, outside_px=0)
    image = np.zeros((grid.ny, grid.nx), dtype=np.int32) if return_counts else None
    for r0 in range(0, grid.ny, BAND_ROWS):
        r1 = min(grid.ny, r0 + BAND_ROWS)
        y_lo = grid.row_y(r0) - grid.res
        y_hi = grid.row_y(r1 - 1) + grid.res
        # quads overlapping the band: ymin <= y_hi and ymax >= y_lo
        hi = int(np.searchsorted(ymin, y_hi, side="right"))
        lo = int(np.searchsorted(ymax_run[:hi], y_lo, side="left")) if hi else 0
        diff = np.zeros((r1 - r0, grid.nx + 1), dtype=np.int32)
        for rows, c0, c1 in _quad_spans(quads[lo:hi], grid, r0, r1):
            _accumulate(diff, rows, c0, c1, r0, grid.nx)
        counts = np.cumsum(diff, axis=1, dtype=np.int32)[:, : grid.nx]
        if image is not None:
            image[r0:r1] = counts
        stats["union_px"] += int(np.count_nonzero(counts))  # counts are never negative
        if rings:
            inside = mask[r0 // BAND_ROWS]
            stats["field_px"] += int(inside.sum())
            covered = counts >= 1
            cov_in = int(np.count_nonzero(inside & covered))
            stats["covered_px"] += cov_in
            stats["gap_px"] += int(np.count_nonzero(inside)) - cov_in
            stats["overlap_px"] += int(np.count_nonzero(inside & (counts >= 2)))
            stats["outside_px"] += int(np.count_nonzero(covered)) - cov_in
    result = CoverageRaster(res=res, **stats)
    if return_counts:
        return result, image, grid
    return result


def union_area(quads, res: float = 0.05) -> float:
    return rasterize(quads, None, res).union_area
