import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from spraysim.paths import (
    Arc,
    Line,
    Path,
    Pose,
    Ring,
    dubins_candidates,
    dubins_path,
    fillet_ring,
    sample_prims,
    wrap_angle,
)


def test_wrap_angle_range():
    a = wrap_angle(np.array([0.0, math.pi, -math.pi, 3 * math.pi, 7.0]))
    assert np.all(a >= -math.pi) and np.all(a < math.pi)
    np.testing.assert_allclose(np.cos(a), np.cos([0.0, math.pi, -math.pi, 3 * math.pi, 7.0]), atol=1e-12)


def test_line_and_arc_evaluation():
    ln = Line(np.array([0.0, 0.0]), np.array([3.0, 4.0]))
    assert ln.length == pytest.approx(5.0)
    p, h = ln.at(np.array([5.0]))
    np.testing.assert_allclose(p[0], [3, 4])
    arc = Arc(np.array([0.0, 5.0]), 5.0, -math.pi / 2, math.pi / 2)  # left quarter from the origin
    p, h = arc.at(np.array([0.0, arc.length]))
    np.testing.assert_allclose(p, [[0, 0], [5, 5]], atol=1e-12)
    np.testing.assert_allclose(h, [0, math.pi / 2], atol=1e-12)


def test_split_and_reverse_preserve_length():
    arc = Arc(np.array([0.0, 0.0]), 4.0, 0.0, -1.2)
    a, b = arc.split(1.0)
    assert a.length + b.length == pytest.approx(arc.length)
    r = arc.reversed()
    np.testing.assert_allclose(r.at(0.0)[0], arc.at(arc.length)[0], atol=1e-12)


def test_path_sub_and_poses():
    prims = [Line(np.array([0.0, 0.0]), np.array([10.0, 0.0])), Arc(np.array([10.0, 5.0]), 5.0, -math.pi / 2, math.pi)]
    path = Path(prims)
    assert path.length == pytest.approx(10 + 5 * math.pi)
    sub = path.sub(5.0, 12.0)
    assert sum(p.length for p in sub) == pytest.approx(7.0)
    assert path.end_pose().heading == pytest.approx(math.pi)
    assert path.start_pose() == Pose(0.0, 0.0, 0.0)


def test_fillet_ring_shortens_perimeter_by_corner_cut():
    sq = np.array([[0, 0], [20, 0], [20, 20], [0, 20]], dtype=float)
    r = 3.0
    ring = Ring(fillet_ring(sq, r))
    assert ring.length == pytest.approx(80 - 4 * (2 * r - r * math.pi / 2))


def test_ring_project_and_run_wraps():
    sq = np.array([[0, 0], [20, 0], [20, 20], [0, 20]], dtype=float)
    ring = Ring.from_polygon(sq, 2.0)
    s = ring.project([10.0, -1.0])
    np.testing.assert_allclose(ring.at(s)[0][0], [10, 0], atol=0.01)
    run = ring.run(ring.length - 5.0, 10.0)
    assert sum(p.length for p in run) == pytest.approx(10.0)
    back = ring.run(3.0, 6.0, forward=False)
    assert sum(p.length for p in back) == pytest.approx(6.0)
    assert ring.forward_distance(ring.length - 1.0, 1.0) == pytest.approx(2.0)


@settings(max_examples=60, deadline=None)
@given(st.floats(-60, 60), st.floats(-60, 60), st.floats(-math.pi, math.pi), st.floats(-math.pi, math.pi))
def test_dubins_reaches_goal(x, y, h0, h1):
    start, goal, r = Pose(0.0, 0.0, h0), Pose(x, y, h1), 5.0
    prims = dubins_path(start, goal, r)
    end = Path(prims).end_pose() if prims else start
    assert math.hypot(end.x - goal.x, end.y - goal.y) < 1e-6
    assert abs(wrap_angle(end.heading - goal.heading)) < 1e-6
    # shortest word is no longer than the straight-line distance plus two full circles
    assert Path(prims).length <= math.hypot(x, y) + 4 * math.pi * r + 1e-6 if prims else True


def test_dubins_straight_ahead_is_a_line():
    L, word, _ = dubins_candidates(Pose(0, 0, 0), Pose(20, 0, 0), 5.0)[0]
    assert L == pytest.approx(20.0)
    assert word in ("LSL", "RSR")


def test_sample_prims_uniform_spacing():
    prims = [Line(np.array([0.0, 0.0]), np.array([10.3, 0.0]), {"kind": "lane"})]
    pts, hdg, metas = sample_prims(prims, 1.0)
    assert len(pts) == 11
    np.testing.assert_allclose(np.diff(pts[:, 0]), 1.03)
    assert all(m["kind"] == "lane" for m in metas)
