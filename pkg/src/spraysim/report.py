"""CSV tables and SVG coverage maps.

CSV files use ``,`` as delimiter, ``.`` as decimal separator and fixed
formatting, so identical inputs give byte-identical files.
"""

from __future__ import annotations

import csv
import io
import math
from typing import Iterable
from xml.sax.saxutils import escape

import numpy as np

from .economics import CostParams, NeverProfitable, years_to_profit
from .field_io import FieldSpec
from .simulator import MODES, MatrixResult, SprayMap

MODE_LABEL = {"one": "1", "two": "2", "multi": "48"}
METHODS = ("M1", "M2")


def _writer():
    buf = io.StringIO()
    return buf, csv.writer(buf, lineterminator="\n")


def _f(x: float, nd: int = 1) -> str:
    if x is None or (isinstance(x, float) and math.isnan(x)):
        return ""
    if isinstance(x, float) and math.isinf(x):
        return "inf"
    return f"{x:.{nd}f}"


def setup_label(method: str, mode: str, n_sections: int | None = None) -> str:
    """Column name such as ``S_M1_48`` (``multi`` uses the section count)."""
    tag = MODE_LABEL[mode] if mode != "multi" or n_sections is None else str(n_sections)
    return f"S_{method}_{tag}"


# --------------------------------------------------------------------------
# tables


def pathlengths_csv(results: Iterable[MatrixResult]) -> str:
    """Path lengths per field: ``A_field, L_M1, L_M2, dL_m, dL_pct``."""
    buf, w = _writer()
    w.writerow(["field", "A_field_ha", "L_M1", "L_M2", "dL_m", "dL_pct"])
    for r in results:
        L1 = r.plans["M1"].length if "M1" in r.plans else float("nan")
        L2 = r.plans["M2"].length if "M2" in r.plans else float("nan")
        dL = L2 - L1
        w.writerow([r.field.id, _f(r.field.area_ha, 2), _f(L1), _f(L2), _f(dL), _f(100.0 * dL / L1, 2)])
    return buf.getvalue()


def volumes_csv(results: Iterable[MatrixResult], n_sections: int = 48) -> str:
    """Spray volumes per field and setup, with differences to the reference."""
    results = list(results)
    buf, w = _writer()
    setups = [(m, s) for m in METHODS for s in MODES]
    head = ["field", "A_field_ha", "S_field_ref"]
    head += [setup_label(m, s, n_sections) for m, s in setups]
    head += ["d" + setup_label(m, s, n_sections) + "_pct" for m, s in setups]
    w.writerow(head)
    for r in results:
        ref = next(iter(r.metrics.values())).S_field_ref if r.metrics else float("nan")
        row = [r.field.id, _f(r.field.area_ha, 2), _f(ref)]
        row += [_f(r.metrics[k].S) if k in r.metrics else "" for k in setups]
        row += [_f(r.metrics[k].dS_pct, 2) if k in r.metrics else "" for k in setups]
        w.writerow(row)
    return buf.getvalue()


def coverage_csv(results: Iterable[MatrixResult]) -> str:
    """One row per (field, setup) with volumes, gap and overlap areas."""
    buf, w = _writer()
    w.writerow(["field", "method", "mode", "L_m", "S", "S_field_ref", "dS_m", "dS_pct", "gap_m2", "gap_pct",
                "overlap_m2"])
    for r in results:
        for m in r.rows():
            w.writerow([m.field_id, m.method, m.mode, _f(m.L), _f(m.S, 3), _f(m.S_field_ref, 3), _f(m.dS_m, 3),
                        _f(m.dS_pct, 3), _f(m.gap_area, 2), _f(100.0 * m.gap_area / m.field_area, 4),
                        _f(m.overlap_area, 2)])
    return buf.getvalue()


def per_hectare_deltas(r: MatrixResult) -> dict[str, float]:
    """Extra litres per hectare of the 1- and 2-section setups over per-nozzle control."""
    out = {}
    A = r.field.area_ha
    for m in METHODS:
        base = r.metrics.get((m, "multi"))
        for s in ("one", "two"):
            k = (m, s)
            if base is not None and k in r.metrics:
                out[f"dS_{m}_{MODE_LABEL[s]}_per_ha"] = (r.metrics[k].S - base.S) / A
    return out


def economics_csv(results: Iterable[MatrixResult], params: CostParams) -> str:
    """Per-hectare volume savings and years until per-section control pays off."""
    buf, w = _writer()
    keys = [f"dS_{m}_{MODE_LABEL[s]}_per_ha" for m in METHODS for s in ("one", "two")]
    w.writerow(["field"] + keys + [k.replace("dS_", "N_years_").replace("_per_ha", "") for k in keys])
    for r in results:
        d = per_hectare_deltas(r)
        years = []
        for k in keys:
            if k not in d:
                years.append("")
                continue
            try:
                years.append(_f(years_to_profit(d[k], params)))
            except NeverProfitable:
                years.append("inf")
        w.writerow([r.field.id] + [_f(d[k], 2) if k in d else "" for k in keys] + years)
    return buf.getvalue()


# --------------------------------------------------------------------------
# SVG


def rate_gray(rate, s_ref: float) -> np.ndarray:
    """Gray level 0..255: white at 0, mid-gray at ``s_ref``, black from ``2*s_ref``."""
    t = np.clip(np.asarray(rate, dtype=float) / (2.0 * s_ref), 0.0, 1.0)
    return np.rint(255.0 * (1.0 - t)).astype(int)


def _pts(xy, flip_y: float) -> str:
    return " ".join(f"{x:.3f},{flip_y - y:.3f}" for x, y in xy)


def render_svg(spray: SprayMap | None, field: FieldSpec | None = None, path_xy=None, margin: float = 5.0,
               title: str | None = None, fill_opacity: float = 1.0) -> str:
    """Coverage map: cells in gray by applied rate, field rings and the path.

    North is up (the y axis is flipped). With ``fill_opacity`` < 1 stacked
    cells show up darker, which makes overlap visible for equal rates.
    """
    groups = []
    if field is not None:
        groups.append(field.contour)
        groups.extend(field.obstacles)
    if spray is not None and len(spray):
        groups.append(spray.quads.reshape(-1, 2))
    if path_xy is None and spray is not None:
        path_xy = spray.path_xy
    if path_xy is not None and len(path_xy):
        groups.append(np.asarray(path_xy))
    allp = np.concatenate(groups) if groups else np.zeros((1, 2))
    lo = allp.min(axis=0) - margin
    hi = allp.max(axis=0) + margin
    width, height = hi - lo
    flip = lo[1] + hi[1]  # y' = flip - y maps [lo, hi] onto itself upside down
    out = [
        '<?xml version="1.0" encoding="UTF-8"?>',
        f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="{lo[0]:.3f} {lo[1]:.3f} {width:.3f} {height:.3f}" '
        f'width="{min(1200.0, 3 * width):.0f}" height="{min(1200.0, 3 * width) * height / width:.0f}">',
    ]
    if title:
        out.append(f"<title>{escape(title)}</title>")
    out.append(f'<rect x="{lo[0]:.3f}" y="{lo[1]:.3f}" width="{width:.3f}" height="{height:.3f}" fill="white"/>')
    if spray is not None and len(spray):
        gray = rate_gray(spray.applied_rate, spray.s_ref) if np.any(spray.volume) else np.full(len(spray), 128)
        op = "" if fill_opacity >= 1 else f' fill-opacity="{fill_opacity:g}"'
        out.append(f'<g id="cells" stroke="none"{op}>')
        q = spray.quads.copy()
        q[..., 1] = flip - q[..., 1]
        rows = np.concatenate([q.reshape(-1, 8), np.repeat(gray[:, None], 3, axis=1)], axis=1).tolist()
        tpl = '<polygon points="%.2f,%.2f %.2f,%.2f %.2f,%.2f %.2f,%.2f" fill="rgb(%d,%d,%d)"/>'
        out.extend(tpl % tuple(r) for r in rows)
        out.append("</g>")
    if field is not None:
        out.append('<g id="field" fill="none" stroke="black" stroke-width="0.5">')
        for ring in [field.contour] + list(field.obstacles):
            out.append(f'<polygon points="{_pts(ring, flip)}"/>')
        out.append("</g>")
    if path_xy is not None and len(path_xy):
        out.append(f'<polyline id="path" fill="none" stroke="#1f4fd1" stroke-width="0.3" '
                   f'points="{_pts(path_xy, flip)}"/>')
    out.append("</svg>")
    return "\n".join(out) + "\n"


def svg_name(field_id: str, method: str, mode: str) -> str:
    safe = "".join(ch if ch.isalnum() or ch in "-_." else "_" for ch in field_id)
    return f"{safe}_{method}_{mode}.svg"


__all__ = [
    "pathlengths_csv", "volumes_csv", "coverage_csv", "economics_csv", "per_hectare_deltas",
    "render_svg", "rate_gray", "setup_label", "svg_name",
]
