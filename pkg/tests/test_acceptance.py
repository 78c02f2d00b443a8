"""Acceptance suite: one test per criterion, each printing a PASS/FAIL line.

Reference numbers (years-to-profit table, break-even volumes,
field-run counts) are hard-coded below; everything else is checked against
independent oracles or structural properties.
"""

import time
from dataclasses import replace

import numpy as np
import pytest
import shapely
from shapely.geometry import Polygon

from spraysim import economics as eco
from spraysim.scenarios import SCENARIOS, compare_overlap_filters, scenario_map
from spraysim.simulator import expected_volume, prepare, simulate_map

from conftest import is_convex_field

# Years to profit, keyed by per-ha saving -> premium -> [(A_total, N@30 EUR/l, N@10 EUR/l)]
REFERENCE_YEARS = {
    18.6: {100_000: [(30, 74.2, 219.7), (100, 22.3, 65.9), (300, 7.4, 22.0), (600, 3.7, 11.0), (1000, 2.2, 6.6)],
           200_000: [(30, 148.4, 439.3), (100, 44.5, 131.8), (300, 14.8, 43.9), (600, 7.4, 22.0), (1000, 4.5, 13.2)]},
    16.7: {100_000: [(30, 82.6, 244.7), (100, 24.8, 73.4), (300, 8.3, 24.5), (600, 4.1, 12.2), (1000, 2.5, 7.3)],
           200_000: [(30, 165.2, 489.3), (100, 49.6, 146.8), (300, 16.5, 48.9), (600, 8.3, 24.5), (1000, 5.0, 14.7)]},
    22.5: {100_000: [(30, 61.3, 181.6), (100, 18.4, 54.5), (300, 6.1, 18.2), (600, 3.1, 9.1), (1000, 1.8, 5.4)],
           200_000: [(30, 122.6, 363.2), (100, 36.8, 109.0), (300, 12.3, 36.3), (600, 6.1, 18.2), (1000, 3.7, 10.9)]},
    18.7: {100_000: [(30, 73.8, 218.5), (100, 22.1, 65.5), (300, 7.4, 21.8), (600, 3.7, 10.9), (1000, 2.2, 6.5)],
           200_000: [(30, 147.6, 437.0), (100, 44.3, 131.1), (300, 14.8, 43.7), (600, 7.4, 21.8), (1000, 4.4, 13.1)]},
}


def _years_errors():
    table = eco.cost_table()
    out = []
    for d, by_k in REFERENCE_YEARS.items():
        for k, rows_k in by_k.items():
            for a, n30, n10 in rows_k:
                for c, n in ((30.0, n30), (10.0, n10)):
                    out.append(((d, k, a, c), n, table[(d, k, a, c)]))
    return out


@pytest.mark.xfail(strict=True, reason="one reference value contradicts the table's own 1/A scaling; "
                                       "see test_reference_years_table_is_self_inconsistent")
def test_criterion_1_years_table(record):
    t0 = time.perf_counter()
    errors = _years_errors()
    elapsed = time.perf_counter() - t0
    bad = [(key, n, v) for key, n, v in errors if abs(v - n) > 0.05]
    worst = max(abs(v - n) for _, n, v in errors)
    ok = len(errors) == 80 and not bad and elapsed < 1.0
    miss = "; ".join(f"dS={k[0]:g} dK={k[1]:.0f} A={k[2]:g} C={k[3]:g}: {v:.4f} vs {n}" for k, n, v in bad)
    record(1, ok, f"{len(errors) - len(bad)}/{len(errors)} values within 0.05 years (max |error| {worst:.4f}), "
                  f"{elapsed * 1000:.1f} ms" + (f"; outside: {miss}" if bad else ""))
    assert ok


def test_years_table_all_but_inconsistent_entry():
    """Every other reference value is reproduced within the stated tolerance."""
    errors = _years_errors()
    bad = [key for key, n, v in errors if abs(v - n) > 0.05]
    assert bad == [(18.7, 100_000, 1000, 10.0)]


def test_reference_years_table_is_self_inconsistent():
    """Years are proportional to dK_ASC / A_total whatever the cost model.
    The reference 6.5 years at 1000 ha cannot lie within 0.05 of any value
    consistent with the reference 437.0 years at 30 ha and twice the premium."""
    rows = dict((a, n10) for a, _, n10 in REFERENCE_YEARS[18.7][100_000])
    rows_200 = dict((a, n10) for a, _, n10 in REFERENCE_YEARS[18.7][200_000])
    # rounding to 0.1 leaves +-0.05 around each printed value
    lo_from_30ha = (rows_200[30] - 0.05) * 30 / 2.0
    hi_from_1000ha = (rows[1000] + 0.05) * 1000
    assert hi_from_1000ha < lo_from_30ha


def test_criterion_2_breakeven(record):
    out = []
    ok = True
    for c, reference in ((30.0, 331_000), (10.0, 981_000)):
        v = eco.breakeven_volume(eco.CostParams(C_chemical=c, dK_ASC=100_000))
        rel = abs(v - reference) / reference
        ok &= rel <= 0.005
        out.append(f"C={c:g}: {v:,.0f} l ({100 * rel:.3f}% from {reference:,})")
    record(2, ok, "; ".join(out))
    assert ok


def test_criterion_3_field_runs(record):
    out = []
    ok = True
    for c, reference in ((30.0, 3988), (10.0, 11819)):
        n = eco.field_runs_to_profit(89.9 - 6.9, eco.CostParams(C_chemical=c))
        rel = abs(n - reference) / reference
        ok &= rel <= 0.005
        out.append(f"C={c:g}: {n:.0f} runs vs {reference} ({100 * rel:.2f}%)")
    record(3, ok, "; ".join(out))
    assert ok


def test_criterion_4_volume_structure(synthetic_runs, record):
    ok = len(synthetic_runs) >= 5
    worst_ref, slowest, bad = 0.0, 0.0, []
    for res, elapsed in synthetic_runs:
        slowest = max(slowest, elapsed)
        for m in ("M1", "M2"):
            s1, s2, s48 = (res.metrics[(m, x)].S for x in ("one", "two", "multi"))
            if not s48 <= s2 <= s1:
                bad.append(f"{res.field.id}/{m}")
            if is_convex_field(res.field):
                worst_ref = max(worst_ref, abs(res.metrics[(m, "multi")].dS_pct))
    ok &= not bad and worst_ref <= 8.0 and slowest < 30.0
    record(4, ok, f"{len(synthetic_runs)} fields, ordering violations {bad or 'none'}, "
                  f"max |S48 - S_ref| on convex fields {worst_ref:.2f}%, slowest field {slowest:.1f} s")
    assert ok


def test_criterion_5_path_lengths(synthetic_runs, record):
    checked, parts, ok = 0, [], True
    for res, _ in synthetic_runs:
        if not is_convex_field(res.field) or len(res.grid.lanes) < 4:
            continue
        checked += 1
        l1, l2 = res.plans["M1"].length, res.plans["M2"].length
        ok &= l2 < l1
        parts.append(f"{res.field.id} {100 * (l2 - l1) / l1:+.2f}%")
    ok &= checked > 0
    record(5, ok, f"L(M2) vs L(M1) on {checked} convex fields: " + ", ".join(parts))
    assert ok


def test_criterion_6_overlap_filters(record):
    res = compare_overlap_filters((0.5, 0.25, 0.125))
    grid = {r.d_G: r for r in res if r.variant == "grid"}
    poly = next(r for r in res if r.variant == "polygon")
    ok = (grid[0.5].gap_area > 0 and grid[0.125].overlap_area > 0 and poly.gap_pct < 0.1
          and all(poly.overlap_area < g.overlap_area for g in grid.values()))
    desc = ", ".join(f"grid {d:g}: gap {g.gap_area:.2f} / overlap {g.overlap_area:.2f} m2" for d, g in grid.items())
    record(6, ok, f"{desc}; polygon: gap {poly.gap_pct:.4f}% / overlap {poly.overlap_area:.4f} m2")
    assert ok


def oracle_union_area(quads: np.ndarray, res: float = 0.01) -> float:
    """Pixel-centre sampling of the union of convex quads, one quad at a time."""
    lo = quads.reshape(-1, 2).min(axis=0) - res
    hi = quads.reshape(-1, 2).max(axis=0) + res
    nx, ny = (np.ceil((hi - lo) / res)).astype(int)
    covered = np.zeros((ny, nx), dtype=bool)
    for q in quads:
        area2 = np.sum(q[:, 0] * np.roll(q[:, 1], -1) - np.roll(q[:, 0], -1) * q[:, 1])
        if area2 == 0:
            continue
        sign = 1.0 if area2 > 0 else -1.0
        c0, r0 = np.floor((q.min(axis=0) - lo) / res).astype(int)
        c1, r1 = np.ceil((q.max(axis=0) - lo) / res).astype(int)
        xs = lo[0] + (np.arange(c0, c1) + 0.5) * res
        ys = lo[1] + (np.arange(r0, r1) + 0.5) * res
        X, Y = np.meshgrid(xs, ys)
        inside = np.ones(X.shape, dtype=bool)
        for a, b in zip(q, np.roll(q, -1, axis=0)):
            cross = (b[0] - a[0]) * (Y - a[1]) - (b[1] - a[1]) * (X - a[0])
            inside &= sign * cross >= 0
        covered[r0:r1, c0:c1] |= inside
    return float(covered.sum()) * res * res


def test_criterion_7_union_oracle(record):
    parts, ok = [], True
    for name in SCENARIOS:
        spray = scenario_map(name)
        exact = shapely.unary_union([Polygon(q) for q in spray.quads]).area
        oracle = oracle_union_area(spray.quads)
        rel = abs(exact - oracle) / oracle
        ok &= rel <= 0.01
        parts.append(f"{name} {exact:.2f} vs {oracle:.2f} m2 ({100 * rel:.3f}%)")
    record(7, ok, "; ".join(parts))
    assert ok


def test_criterion_8_invariants(small_field, small_matrix, cfg, record):
    res = small_matrix
    checks = {}
    # closure: straight cells carry exactly the reference rate
    worst = 0.0
    for spray in res.maps.values():
        st = spray.kind == "straight"
        worst = max(worst, float(np.max(np.abs(spray.applied_rate[st] / spray.s_ref - 1.0))))
    checks["closure"] = worst <= 1e-6
    # volume conservation against an independent per-step sum
    worst_v = 0.0
    for (m, mode), spray in res.maps.items():
        c = replace(cfg, method=m, section_mode=mode)
        exp = expected_volume(res.plans[m], c, spray, mode)
        worst_v = max(worst_v, abs(spray.total_volume - exp) / exp)
    checks["conservation"] = worst_v <= 1e-9
    # determinism: repeat run is bit-identical
    plan = res.plans["M1"]
    a = simulate_map(small_field, plan, cfg, "multi")
    b = simulate_map(small_field, plan, cfg, "multi")
    checks["determinism"] = (a.quads.tobytes() == b.quads.tobytes() and a.volume.tobytes() == b.volume.tobytes())
    # s_ref scaling
    c2 = replace(cfg, s_volume_ref=2 * cfg.s_volume_ref)
    d = simulate_map(small_field, plan, c2, "multi", prepared=prepare(small_field, plan, c2))
    checks["linearity"] = (np.array_equal(a.quads, d.quads)
                           and abs(d.total_volume / a.total_volume - 2.0) <= 1e-12)
    # monotonicity in section granularity
    checks["monotonicity"] = all(
        res.metrics[(m, "multi")].S <= res.metrics[(m, "two")].S <= res.metrics[(m, "one")].S for m in ("M1", "M2"))
    ok = all(checks.values())
    record(8, ok, ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items())
           + f" (closure err {worst:.1e}, volume err {worst_v:.1e})")
    assert ok


def test_criterion_9_gap_free(synthetic_runs, record):
    worst, where = 0.0, ""
    for res, _ in synthetic_runs:
        for m in res.rows():
            pct = 100.0 * m.gap_area / m.field_area
            if pct > worst:
                worst, where = pct, f"{m.field_id} {m.method}/{m.mode}"
    ok = worst < 0.5
    record(9, ok, f"max gap {worst:.3f}% of field area ({where}) over {6 * len(synthetic_runs)} runs")
    assert ok
