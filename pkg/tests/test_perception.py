"""Scene-object selection, classification, annotation, and overlays."""
import math

import pytest

from conftest import box, make_world, straight_lane
from teleopsim import perception as PC
from teleopsim.perception import (Annotation, PerceptionState, SceneObject,
                                  annotate, classify_object, compute_overlays,
                                  select_object)
from teleopsim.planner import RouteFrame, effective_physical, plan_bypass
from teleopsim.world import (Obstacle, SurfacePatch, load_scenario,
                             physical_obstacle_views)


def crate_world():
    return make_world(
        obstacles=[
            Obstacle("crate", "static", box(20.0, 0.0, 1.0, 1.0)),
            Obstacle("cone_line", "static", box(24.0, 0.0, 0.3, 1.5),
                     physicality="logical"),
        ],
        patches=[SurfacePatch("verge", box(20.0, -5.0, 4.0, 1.0),
                              drivable=False)])


class TestSelection:
    def test_point_inside_object(self):
        obj = select_object(crate_world(), (20.0, 0.0))
        assert obj is not None and obj.object_id == "crate"
        assert obj.current_class == "unclassified"

    def test_within_radius_outside_polygon(self):
        obj = select_object(crate_world(), (20.0, 1.9))
        assert obj is not None and obj.object_id == "crate"

    def test_beyond_radius_selects_nothing(self):
        assert select_object(crate_world(), (20.0, 2.5)) is None

    def test_smaller_id_tie_break(self):
        w = make_world(obstacles=[
            Obstacle("b_box", "static", box(10.0, 1.0, 1.0, 0.5)),
            Obstacle("a_box", "static", box(10.0, -1.0, 1.0, 0.5))])
        # the midpoint is equidistant from both boxes
        obj = select_object(w, (10.0, 0.0))
        assert obj.object_id == "a_box"

    def test_surface_patch_and_scripted_vehicle_selectable(self):
        w = crate_world()
        assert select_object(w, (20.0, -5.0)).is_surface
        sc = load_scenario("busy_junction")
        wj = sc.initial_world
        sv = wj.other_vehicles[0]
        obj = select_object(wj, (sv.x, sv.y))
        assert obj is not None and obj.object_id == sv.id

    def test_selection_reflects_prior_classification(self):
        state = PerceptionState()
        w = crate_world()
        classify_object(state, select_object(w, (20.0, 0.0)), "static_object")
        again = select_object(w, (20.0, 0.0), state)
        assert again.current_class == "static_object"


class TestClassify:
    def test_unknown_class_rejected(self):
        state = PerceptionState()
        obj = SceneObject("x", True, "unclassified")
        with pytest.raises(PC.PerceptionError):
            classify_object(state, obj, "wizard")

    def test_surface_cannot_be_dynamic(self):
        state = PerceptionState()
        obj = SceneObject("verge", True, "unclassified", is_surface=True)
        with pytest.raises(PC.PerceptionError):
            classify_object(state, obj, "dynamic_object")

    def test_free_space_downgrades_logical_obstacle(self):
        state = PerceptionState()
        w = crate_world()
        cone = next(ob for ob in w.obstacles if ob.id == "cone_line")
        assert state.effective_logical(cone)
        classify_object(state, select_object(w, (24.0, 0.0), state),
                        "free_space")
        assert not state.effective_logical(cone)

    def test_physical_obstacle_never_downgrades(self):
        state = PerceptionState()
        w = crate_world()
        crate = next(ob for ob in w.obstacles if ob.id == "crate")
        state.classifications["crate"] = "free_space"
        state.ignorable.add("crate")
        assert not state.effective_logical(crate)   # logical-rule sense only
        assert any(ob.id == "crate"
                   for ob in effective_physical(w, state))


class TestAnnotate:
    def test_repurpose_requires_a_patch(self):
        state = PerceptionState()
        w = crate_world()
        with pytest.raises(PC.PerceptionError):
            annotate(state, w, Annotation("crate", "drive here",
                                          "repurpose_drivable", "op", 1.0))

    def test_repurpose_scoped_to_plotted_routes(self):
        from teleopsim.planner import (PlanFailure, Trajectory,
                                       plan_plotted_route)
        sc = load_scenario("static_obstacle")
        w = sc.initial_world
        frame = RouteFrame(w, sc.route_plan)
        state = PerceptionState()
        pts = [(60.0, -0.5), (70.0, -2.6), (90.0, -2.6), (100.0, -0.5)]
        before = plan_plotted_route(w, pts, route=frame, perception=state)
        assert isinstance(before, PlanFailure)
        assert before.reason == "point_not_drivable"
        annotate(state, w, Annotation("pavement_south", "clear pavement",
                                      "repurpose_drivable", "op", 2.0))
        after = plan_plotted_route(w, pts, route=frame, perception=state)
        assert isinstance(after, Trajectory)
        # bypass corridors remain bounded by lane geometry regardless
        still = plan_bypass(w, "right", route=frame, perception=state)
        assert isinstance(still, PlanFailure)

    def test_mark_ignorable_neutralizes_logical_block(self):
        state = PerceptionState()
        w = crate_world()
        cone = next(ob for ob in w.obstacles if ob.id == "cone_line")
        annotate(state, w, Annotation("cone_line", "stale cones",
                                      "mark_ignorable", "op", 3.0))
        assert not state.effective_logical(cone)
        assert state.annotations[-1].label == "stale cones"

    def test_mark_hazard_is_recorded(self):
        state = PerceptionState()
        w = crate_world()
        annotate(state, w, Annotation("crate", "sharp debris", "mark_hazard",
                                      "op", 4.0))
        assert "crate" in state.hazards

    def test_unknown_effect_rejected_at_construction(self):
        with pytest.raises(PC.PerceptionError):
            Annotation("crate", "x", "make_invisible", "op", 0.0)

    def test_annotation_log_is_append_only(self):
        state = PerceptionState()
        w = crate_world()
        for i in range(3):
            annotate(state, w, Annotation("crate", f"note{i}", "none",
                                          "op", float(i)))
        assert [a.label for a in state.annotations] == \
            ["note0", "note1", "note2"]
        clocks = [a.clock for a in state.annotations]
        assert clocks == sorted(clocks)


class TestOverlays:
    def test_markers_cover_their_polygons(self):
        w = crate_world()
        ov = compute_overlays(w, None, detected_ids=["crate", "cone_line"])
        assert {m[0] for m in ov.obstacle_markers} == {"crate", "cone_line"}
        for oid, center, radius in ov.obstacle_markers:
            poly = next(ob.polygon for ob in w.obstacles if ob.id == oid)
            for p in poly:
                assert math.hypot(p[0] - center[0], p[1] - center[1]) <= radius

    def test_brake_wall_iff_brake_active(self):
        w = crate_world()
        w.vehicle.brake_active = False
        assert compute_overlays(w, None).brake_wall is None
        w.vehicle.brake_active = True
        wall = compute_overlays(w, None).brake_wall
        assert wall is not None and len(wall) == 2
        # the wall sits ahead of the front bumper
        for p in wall:
            assert p[0] > w.vehicle.pose.x + 0.5 * w.vehicle.wheelbase \
                + 0.5 * w.vehicle.length

    def test_projection_length_strictly_increasing_in_speed(self):
        lengths = []
        speeds = [0.0, 1.0, 2.5, 5.0, 7.5, 10.0, 12.5, 15.0]
        for v in speeds:
            w = make_world(speed=v)
            w.vehicle.brake_active = False
            ov = compute_overlays(w, None)
            lengths.append(ov.projection_length)
        assert lengths[0] == 0.0
        for a, b in zip(lengths, lengths[1:]):
            assert b > a
        # 3-second horizon exactly, when coasting straight
        for v, l in zip(speeds, lengths):
            assert l == pytest.approx(v * PC.PROJECTION_HORIZON)

    def test_active_trajectory_projection_follows_the_plan(self):
        sc = load_scenario("static_obstacle")
        w = sc.initial_world
        frame = RouteFrame(w, sc.route_plan)
        traj = plan_bypass(w, "left", route=frame)
        ov = compute_overlays(w, traj)
        pts = ov.trajectory_projection
        assert len(pts) >= 2
        assert pts[0] == pytest.approx((w.vehicle.pose.x, w.vehicle.pose.y))
        # reported length is the arc length of the projected polyline
        arc = sum(math.hypot(b[0] - a[0], b[1] - a[1])
                  for a, b in zip(pts, pts[1:]))
        assert ov.projection_length == pytest.approx(arc, abs=1e-6)
        # and covers roughly three seconds of the planned motion
        assert 0.0 < ov.projection_length <= \
            PC.PROJECTION_HORIZON * max(s.speed for s in traj.samples) + 1e-6

    def test_overlay_json_shape(self):
        w = crate_world()
        w.vehicle.brake_active = True
        doc = compute_overlays(w, None, detected_ids=["crate"]).to_json()
        assert set(doc) == {"obstacle_markers", "brake_wall",
                            "trajectory_projection", "projection_length"}
        assert doc["obstacle_markers"][0]["id"] == "crate"
        assert len(doc["brake_wall"]) == 2
