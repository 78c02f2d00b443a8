import math

import numpy as np
import pytest

from spraysim.scenarios import (
    SCENARIO_CONFIG,
    SCENARIOS,
    candidate_cells,
    compare_overlap_filters,
    filter_comparison_csv,
    filter_grid,
    filter_polygon,
    scenario_map,
    scenario_plan,
    scenario_prims,
)


@pytest.mark.parametrize("name, length", [("straight", 50.0), ("turn90", 60 + 2.5 * math.pi)])
def test_scenario_lengths(name, length):
    plan = scenario_plan(name)
    assert plan.length == pytest.approx(length, rel=1e-9)


def test_serpentine_geometry():
    prims = scenario_prims("serpentine")
    cfg = SCENARIO_CONFIG
    gap = cfg.working_width - 2 * cfg.min_turn_radius
    expected = 3 * 40 + 2 * (math.pi * cfg.min_turn_radius + gap)
    assert sum(p.length for p in prims) == pytest.approx(expected)
    plan = scenario_plan("serpentine")
    # ends heading east again, two passes further south
    np.testing.assert_allclose(plan.xy[-1], [40, -2 * cfg.working_width], atol=1e-9)


def test_unknown_scenario():
    with pytest.raises(ValueError):
        scenario_prims("loop")


def test_straight_lane_cells_are_exact():
    spray = scenario_map("straight")
    assert spray.area.sum() == pytest.approx(50 * 24)
    assert set(spray.kind) == {"straight"}


def test_forward_only_candidates_drop_backward_sections():
    plan = scenario_plan("serpentine")
    _, all_mask = candidate_cells(plan, SCENARIO_CONFIG)
    _, fwd = candidate_cells(plan, SCENARIO_CONFIG, forward_only=True)
    assert fwd.sum() < all_mask.sum()


def test_filters_are_monotone_in_threshold():
    plan = scenario_plan("turn90")
    cells, mask = candidate_cells(plan, SCENARIO_CONFIG)
    kept = [filter_grid(cells, mask, d).sum() for d in (1.0, 0.5, 0.25)]
    assert kept[0] <= kept[1] <= kept[2] <= mask.sum()
    poly = filter_polygon(cells, mask, window=None)
    assert poly.sum() <= mask.sum()


@pytest.fixture(scope="module")
def comparison():
    return compare_overlap_filters((0.5, 0.25, 0.125))


def test_filter_comparison_properties(comparison):
    grid = [r for r in comparison if r.variant == "grid"]
    poly = comparison[-1]
    assert poly.variant == "polygon" and poly.d_G is None
    assert grid[0].gap_area > 0 and grid[-1].overlap_area > 0
    assert poly.gap_pct < 0.1
    assert all(poly.overlap_area < g.overlap_area for g in grid)
    assert all(poly.gap_area < g.gap_area for g in grid)
    assert all(r.swath_area == pytest.approx(poly.swath_area) for r in comparison)


def test_vanishing_threshold_approaches_unfiltered_overlap():
    tiny, = [r for r in compare_overlap_filters((1e-6,)) if r.variant == "grid"]
    plan = scenario_plan("serpentine")
    cells, mask = candidate_cells(plan, SCENARIO_CONFIG)
    from spraysim.scenarios import _measure
    from spraysim.raster import Grid
    grid = Grid.around(cells.quads[mask].reshape(-1, 2), 0.02)
    unfiltered = _measure(cells.quads[mask], cells.quads[mask], 0.02, grid)[3]
    assert tiny.overlap_area == pytest.approx(unfiltered, rel=0.02)


def test_filter_comparison_csv(comparison):
    lines = filter_comparison_csv(comparison).splitlines()
    assert lines[0].startswith("variant,d_G")
    assert len(lines) == 5 and lines[-1].startswith("polygon,,")


@pytest.mark.parametrize("name", SCENARIOS)
def test_scenario_maps_are_deterministic(name):
    a, b = scenario_map(name), scenario_map(name)
    assert a.quads.tobytes() == b.quads.tobytes()
