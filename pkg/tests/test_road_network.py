import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from junction_bench.road_network import (ALL_MOVEMENTS, Arm, Movement, Region, Turn, _polyline,
                                         build_default_intersection, pose_at, project, region_of,
                                         straight_route, wrap_angle)


def test_twelve_routes(imap):
    assert len(imap.routes) == 12
    assert set(imap.routes) == set(ALL_MOVEMENTS)


def test_arms_orthogonal():
    hs = [a.approach_heading for a in Arm]
    for i, h in enumerate(hs):
        d = wrap_angle(hs[(i + 1) % 4] - h)
        assert d == pytest.approx(math.pi / 2)


def test_movement_exits():
    assert Movement(Arm.SOUTH, Turn.STRAIGHT).exit is Arm.NORTH
    assert Movement(Arm.SOUTH, Turn.LEFT).exit is Arm.WEST
    assert Movement(Arm.SOUTH, Turn.RIGHT).exit is Arm.EAST


def test_straight_length_is_two_approaches_plus_span(imap):
    for arm in Arm:
        r = imap.route(Movement(arm, Turn.STRAIGHT))
        s_in, s_out = r.junction_span
        assert r.length == pytest.approx(2 * 80.0 + (s_out - s_in), abs=1e-9)
        assert s_out - s_in == pytest.approx(20.0, abs=1e-9)


def test_turn_lengths_from_arc_geometry(imap):
    # quarter arcs of radius half -/+ lane/2 joined to two 80 m legs
    for arm in Arm:
        right = imap.route(Movement(arm, Turn.RIGHT)).length
        left = imap.route(Movement(arm, Turn.LEFT)).length
        assert left > right
        # polyline chords undershoot the arc by < 1e-3 m per quarter circle at 0.5 m spacing
        assert right == pytest.approx(160 + math.pi / 2 * (10 - 1.75), abs=2e-3)
        assert left == pytest.approx(160 + math.pi / 2 * (10 + 1.75), abs=2e-3)


def test_route_sampling_invariants(imap):
    for mv, r in imap.routes.items():
        cum = r.cumulative_length
        assert cum[0] == 0.0
        assert np.all(np.diff(cum) > 0)
        gaps = np.hypot(*np.diff(r.points, axis=0).T)
        assert gaps.max() <= 0.5 + 1e-9
        h = np.diff(r.headings)
        assert np.abs(wrap_angle(h)).max() < 0.2


def test_end_segments_align_with_arms(imap):
    for mv, r in imap.routes.items():
        d0 = r.points[1] - r.points[0]
        d1 = r.points[-1] - r.points[-2]
        entry = mv.entry.approach_heading
        exit_heading = wrap_angle(mv.exit.approach_heading + math.pi)
        assert abs(wrap_angle(math.atan2(d0[1], d0[0]) - entry)) < 1e-6
        assert abs(wrap_angle(math.atan2(d1[1], d1[0]) - exit_heading)) < 1e-6


def _line_offset(points, anchor, heading):
    n = np.array([-math.sin(heading), math.cos(heading)])
    return np.abs((points - anchor) @ n)


def test_junction_box_holds_points_off_both_lane_lines(imap):
    # a point more than half a lane away from both its entry and its exit
    # lane line can only be on the turning part, which must lie in the box
    half_lane = imap.lane_width / 2
    xmin, ymin, xmax, ymax = imap.junction_box
    for r in imap.routes.values():
        off_entry = _line_offset(r.points, r.points[0], r.headings[0])
        off_exit = _line_offset(r.points, r.points[-1], r.headings[-1])
        sel = r.points[(off_entry > half_lane) & (off_exit > half_lane)]
        assert np.all((sel[:, 0] >= xmin - 1e-9) & (sel[:, 0] <= xmax + 1e-9))
        assert np.all((sel[:, 1] >= ymin - 1e-9) & (sel[:, 1] <= ymax + 1e-9))
        if r.movement.turn is not Turn.STRAIGHT:
            assert len(sel) > 0


def test_pose_at_endpoints(imap):
    r = imap.route(Movement(Arm.EAST, Turn.LEFT))
    p0, h0 = pose_at(r, 0.0)
    assert np.allclose(p0, r.points[0])
    assert h0 == pytest.approx(Arm.EAST.approach_heading)
    p1, _ = pose_at(r, r.length)
    assert np.allclose(p1, r.points[-1])


def test_pose_at_out_of_range(imap):
    r = imap.route(Movement(Arm.SOUTH, Turn.STRAIGHT))
    with pytest.raises(ValueError):
        pose_at(r, -0.01)
    with pytest.raises(ValueError):
        pose_at(r, r.length + 0.01)


def test_straight_route_constant_heading(imap):
    r = imap.route(Movement(Arm.WEST, Turn.STRAIGHT))
    hs = [pose_at(r, s)[1] for s in np.linspace(0, r.length, 57)]
    assert np.allclose(hs, hs[0])


def test_project_roundtrip_dense(imap):
    for r in imap.routes.values():
        for s in np.arange(0.0, r.length, 0.1):
            p, _ = pose_at(r, s)
            assert abs(project(r, p) - s) <= 0.25


def test_project_tie_breaks_to_smaller_s():
    # a U-shaped route passing (5, 0) going out and (5, 2) coming back
    r = _polyline(None, [("line", ((0, 0), (10, 0))), ("line", ((10, 0), (10, 2))),
                         ("line", ((10, 2), (0, 2)))])
    assert project(r, (5.0, 1.0)) == pytest.approx(5.0)


def test_project_far_point_is_finite(imap):
    r = imap.route(Movement(Arm.NORTH, Turn.RIGHT))
    s = project(r, (100.0, 100.0))
    assert math.isfinite(s) and 0 <= s <= r.length


def test_region_examples(imap):
    r = imap.route(Movement(Arm.SOUTH, Turn.LEFT))
    assert region_of(imap, r, 0.0) is Region.BEFORE_JUNCTION
    assert region_of(imap, r, r.length) is Region.AFTER_JUNCTION
    s_in, s_out = r.junction_span
    mid = 0.5 * (s_in + s_out)
    assert region_of(imap, r, mid) is Region.INSIDE_JUNCTION
    assert imap.contains(pose_at(r, mid)[0])


def test_region_monotone_and_matches_box(imap):
    for r in imap.routes.values():
        regs = [int(region_of(imap, r, s)) for s in np.arange(0, r.length, 0.1)]
        assert regs == sorted(regs)
        assert set(regs) == {0, 1, 2}
        s_in, s_out = r.junction_span
        # junction span endpoints sit on the box boundary
        for s in (s_in, s_out):
            x, y = pose_at(r, s)[0]
            assert max(abs(x), abs(y)) == pytest.approx(10.0, abs=1e-9)


def test_straight_route_helper():
    r = straight_route(50.0, (1.0, 2.0), math.pi / 2)
    assert r.length == pytest.approx(50.0)
    assert np.allclose(r.points[-1], (1.0, 52.0))


@settings(max_examples=60, deadline=None)
@given(st.sampled_from(ALL_MOVEMENTS), st.floats(0.0, 1.0))
def test_project_inverts_pose(mv, frac):
    imap = build_default_intersection()
    r = imap.route(mv)
    s = frac * r.length
    assert abs(project(r, pose_at(r, s)[0]) - s) <= 0.25


@settings(max_examples=30, deadline=None)
@given(st.floats(-math.pi, math.pi), st.floats(-50, 50), st.floats(-50, 50),
       st.sampled_from(ALL_MOVEMENTS), st.floats(0.0, 1.0))
def test_transformed_map_moves_routes_rigidly(angle, ox, oy, mv, frac):
    base = build_default_intersection()
    moved = base.transformed(angle, (ox, oy))
    r0, r1 = base.route(mv), moved.route(mv)
    s = frac * r0.length
    (p0, h0), (p1, h1) = pose_at(r0, s), pose_at(r1, s)
    c, sn = math.cos(angle), math.sin(angle)
    expect = (c * p0[0] - sn * p0[1] + ox, sn * p0[0] + c * p0[1] + oy)
    assert np.allclose(p1, expect, atol=1e-9)
    assert abs(wrap_angle(h1 - h0 - angle)) < 1e-9
    assert moved.contains(p1) == base.contains(p0)
