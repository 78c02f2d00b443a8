import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from shapely.geometry import Point, Polygon

from spraysim.geometry import (
    FieldTooSmallError,
    GeometryError,
    SprayedPolygonState,
    as_ring,
    convexify_quads,
    make_quad,
    offset_inward,
    orient,
    point_in_polygon,
    points_in_polygon,
    polygon_area,
    polygon_area_many,
    polygon_centroid,
    quads_contain,
    self_intersections,
    sprayed_union_windowed,
)

SQUARE = np.array([[0, 0], [10, 0], [10, 10], [0, 10]], dtype=float)


def test_area_sign_and_orientation():
    assert polygon_area(SQUARE) == pytest.approx(100.0)
    assert polygon_area(SQUARE[::-1]) == pytest.approx(-100.0)
    assert polygon_area(orient(SQUARE[::-1])) > 0
    assert polygon_area(orient(SQUARE, ccw=False)) < 0


def test_as_ring_drops_closing_vertex_and_rejects_bad_input():
    closed = np.vstack([SQUARE, SQUARE[:1]])
    assert len(as_ring(closed)) == 4
    with pytest.raises(GeometryError):
        as_ring([[0, 0], [1, 1]])
    with pytest.raises(GeometryError):
        as_ring([[0, 0], [1, np.nan], [1, 1]])


def test_centroid_of_square():
    np.testing.assert_allclose(polygon_centroid(SQUARE), [5, 5])


def test_point_in_polygon_with_hole():
    hole = np.array([[4, 4], [4, 6], [6, 6], [6, 4]], dtype=float)
    assert point_in_polygon([1, 1], SQUARE)
    assert not point_in_polygon([5, 5], SQUARE, [hole])
    assert not point_in_polygon([11, 5], SQUARE)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.floats(-5, 15), st.floats(-5, 15)), min_size=1, max_size=30))
def test_points_in_polygon_matches_shapely(pts):
    ring = np.array([[0, 0], [10, 0], [10, 3], [4, 3], [4, 8], [0, 8]], dtype=float)
    shp = Polygon(ring)
    got = points_in_polygon(np.array(pts), ring)
    for p, g in zip(pts, got):
        if shp.exterior.distance(Point(p)) > 1e-6:
            assert g == shp.contains(Point(p))


def test_self_intersections_detects_bowtie():
    bowtie = np.array([[0, 0], [2, 2], [2, 0], [0, 2]], dtype=float)
    assert self_intersections(bowtie)
    assert not self_intersections(SQUARE)


def test_offset_inward_area_and_annihilation():
    inner = offset_inward(SQUARE, 1.0)
    assert polygon_area(inner) == pytest.approx(64.0)
    with pytest.raises(FieldTooSmallError):
        offset_inward(SQUARE, 6.0)
    with pytest.raises(GeometryError):
        offset_inward(SQUARE, 0.0)


def test_convexify_repairs_bowtie():
    bowtie = np.array([[[0, 0], [1, 1], [1, 0], [0, 1]]], dtype=float)
    q = convexify_quads(bowtie)
    assert polygon_area_many(q)[0] == pytest.approx(1.0)


def test_make_quad_drops_degenerate_wedges():
    assert make_quad(np.zeros((4, 2)), "wedge", 1) is None
    cell = make_quad(SQUARE[::-1], "straight", -3, step=7)
    assert cell.area == pytest.approx(100.0)
    assert cell.section_index == -3 and cell.step == 7


@settings(max_examples=50, deadline=None)
@given(st.floats(-2, 12), st.floats(-2, 12))
def test_quads_contain_matches_shapely(x, y):
    q = np.array([[0, 0], [10, 1], [9, 9], [1, 8]], dtype=float)
    got = quads_contain(q[None], np.array([[x, y]]))[0]
    shp = Polygon(q)
    if shp.exterior.distance(Point(x, y)) > 1e-6:
        assert got == shp.contains(Point(x, y))


def test_sprayed_state_window_forgets_old_steps():
    state = SprayedPolygonState(window=2)
    unit = np.array([[0, 0], [1, 0], [1, 1], [0, 1]], dtype=float)
    for k in range(3):
        state.add_step([unit + [2 * k, 0]])
    assert len(state) == 2
    assert not state.contains([0.5, 0.5])
    assert state.contains([2.5, 0.5]) and state.contains([4.5, 0.5])
    assert state.area == pytest.approx(2.0)


def test_sprayed_state_full_history_and_helper():
    state = sprayed_union_windowed(None, [SQUARE], window=None)
    state = sprayed_union_windowed(state, [SQUARE + 5], window=None)
    assert state.area == pytest.approx(175.0)
    np.testing.assert_array_equal(state.contains_many([[1, 1], [14, 14], [20, 20]]), [True, True, False])
    assert not SprayedPolygonState().contains([0, 0])


def test_boundary_points_count_inside():
    q = SQUARE[None]
    assert quads_contain(q, np.array([[10.0, 5.0]]))[0]
    assert not quads_contain(q, np.array([[10.0 + 1e-6, 5.0]]))[0]
    assert math.isclose(polygon_area_many(q)[0], 100.0)
