"""Maneuver planning: bypass corridors, rerouting, plotted routes, U-turns,
creep, gap keeping, lateral snap, stop profiles, and pure-pursuit tracking.

Every planning function is a pure function of a world snapshot. Successful
plans return a Trajectory (with a report of crossed logical constraints for
the authority gate); failures return a typed PlanFailure whose `physical`
flag tells the gate whether the blocker is a hard safety constraint.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple, Union

import networkx as nx

from .geometry import (Point, Polyline, angle_diff, convex_intersects,
                       normalize_angle)
from .perception import PerceptionState
from .world import (LaneSegment, Obstacle, Pose, VehicleState, WorldState,
                    drivable_interval, point_on_road, route_polyline)


@dataclass
class PlannerConfig:
    clearance_margin: float = 0.5
    maneuver_speed: float = 3.0
    cruise_speed: float = 5.0
    creep_speed: float = 2.0
    creep_accel: float = 1.0
    gap_gain: float = 2.0
    gap_accel_min: float = -3.0
    gap_accel_max: float = 2.0
    gap_standoff: float = 0.5
    max_steer: float = 0.6
    max_accel: float = 3.0
    lookahead_gain: float = 0.35
    lookahead_min: float = 1.5
    lookahead_max: float = 6.0
    snap_edge_margin: float = 0.2
    dynamic_horizon: float = 8.0
    bypass_search: float = 60.0
    min_transition: float = 8.0
    sample_ds: float = 0.25
    max_route_alternatives: int = 3

    @property
    def max_curvature(self) -> float:
        return math.tan(self.max_steer) / 2.7

    @classmethod
    def from_file(cls, path=None) -> "PlannerConfig":
        if path is None:
            raw = resources.files("teleopsim.data").joinpath(
                "planner_config.json").read_text(encoding="utf-8")
        else:
            with open(path, "r", encoding="utf-8") as fh:
                raw = fh.read()
        return cls(**json.loads(raw))


DEFAULT_CFG = PlannerConfig()


@dataclass
class PlanFailure:
    reason: str
    physical: bool = False
    detail: str = ""
    index: Optional[int] = None


@dataclass
class TrajectorySample:
    t: float
    pose: Pose
    speed: float


@dataclass
class Trajectory:
    samples: List[TrajectorySample]
    source_command: str
    terminal: str = "stop"                    # "stop" | "resume"
    crossed_logical: Tuple[Tuple[str, ...], ...] = ()

    @property
    def length(self) -> float:
        s = 0.0
        for i in range(1, len(self.samples)):
            a = self.samples[i - 1].pose
            b = self.samples[i].pose
            s += math.hypot(b.x - a.x, b.y - a.y)
        return s

    @property
    def duration(self) -> float:
        return self.samples[-1].t if self.samples else 0.0

    def path(self) -> Optional[Polyline]:
        pts = []
        for s in self.samples:
            p = (s.pose.x, s.pose.y)
            if not pts or math.hypot(p[0] - pts[-1][0], p[1] - pts[-1][1]) > 1e-9:
                pts.append(p)
        return Polyline(pts) if len(pts) >= 2 else None

    def upcoming(self, rel_t: float, horizon: float) -> Tuple[List[Point], float]:
        """Points and arc length of the slice [rel_t, rel_t + horizon]."""
        pts: List[Point] = []
        length = 0.0
        prev = None
        for s in self.samples:
            if s.t < rel_t:
                prev = s
                continue
            if s.t > rel_t + horizon:
                break
            p = (s.pose.x, s.pose.y)
            if prev is not None and not pts:
                pts.append((prev.pose.x, prev.pose.y))
            if pts:
                length += math.hypot(p[0] - pts[-1][0], p[1] - pts[-1][1])
            pts.append(p)
            prev = s
        return pts, length


class TrajectoryInvariantError(Exception):
    pass


def validate_trajectory(traj: Trajectory, cfg: PlannerConfig = DEFAULT_CFG):
    """Runtime validator for the Trajectory invariants."""
    samples = traj.samples
    if not samples:
        raise TrajectoryInvariantError("empty trajectory")
    if abs(samples[0].t) > 1e-12:
        raise TrajectoryInvariantError("t must start at 0")
    for i in range(1, len(samples)):
        if samples[i].t <= samples[i - 1].t:
            raise TrajectoryInvariantError(f"t not strictly increasing at {i}")
        a, b = samples[i - 1].pose, samples[i].pose
        ds = math.hypot(b.x - a.x, b.y - a.y)
        if ds > 1e-6:
            kappa = abs(angle_diff(b.heading, a.heading)) / ds
            # chord-based estimate overshoots the true arc curvature by
            # O((ds/r)^2); allow that much on top of the hard bound
            if kappa > cfg.max_curvature * 1.001 + 1e-6:
                raise TrajectoryInvariantError(
                    f"curvature {kappa:.4f} exceeds bound at sample {i}")
    if traj.terminal == "stop" and samples[-1].speed > 1e-9:
        raise TrajectoryInvariantError("stop trajectory must end at v=0")
    if traj.terminal not in ("stop", "resume"):
        raise TrajectoryInvariantError(f"unknown terminal {traj.terminal!r}")


# ---------------------------------------------------------------------------
# Route frame

class RouteFrame:
    """Concatenated route centerline with per-lane spans along it."""

    def __init__(self, world: WorldState, route_plan: Sequence[str]):
        self.route_plan = list(route_plan)
        self.ref = route_polyline(world.road, route_plan)
        self.spans: List[Tuple[LaneSegment, float, float]] = []
        for lane_id in route_plan:
            lane = world.road[lane_id]
            s0, _ = self.ref.project(lane.centerline.points[0])
            s1, _ = self.ref.project(lane.centerline.points[-1])
            self.spans.append((lane, min(s0, s1), max(s0, s1)))

    def lane_at(self, s: float) -> LaneSegment:
        for lane, a, b in self.spans:
            if a - 1e-6 <= s <= b + 1e-6:
                return lane
        return self.spans[-1][0] if s > self.spans[-1][2] else self.spans[0][0]


def effective_physical(world: WorldState,
                       perception: Optional[PerceptionState]) -> List[Obstacle]:
    from .world import physical_obstacle_views
    return physical_obstacle_views(world)


def effective_logical(world: WorldState,
                      perception: Optional[PerceptionState]) -> List[Obstacle]:
    from .world import logical_obstacles
    obs = logical_obstacles(world)
    if perception is None:
        return obs
    return [ob for ob in obs if perception.effective_logical(ob)]


def _obstacle_clearance(ob: Obstacle, perception: Optional[PerceptionState],
                        cfg: PlannerConfig) -> float:
    m = cfg.clearance_margin
    if perception is not None and ob.id in perception.hazards:
        m *= 2.0
    return m


def _scripted_polygon_at(sv, clock: float, rel_t: float) -> List[Point]:
    """Scripted vehicle footprint rel_t seconds ahead of the given clock,
    integrating its velocity timeline from the current position."""
    from .geometry import rect_corners
    x, y = sv.x, sv.y
    t = clock
    end = clock + rel_t
    marks = sorted({m for m, _, _ in sv.timeline if t < m < end})
    for m in marks + [end]:
        vx, vy = sv.velocity_at(t)
        x += vx * (m - t)
        y += vy * (m - t)
        t = m
    return rect_corners(x, y, sv.heading, sv.length, sv.width)


def _collides_timed(world: WorldState, vehicle: VehicleState, pose: Pose,
                    rel_t: float, perception: Optional[PerceptionState],
                    margin: float = 0.0) -> Optional[str]:
    """Obstacle id hit by the footprint at pose, rel_t seconds from now."""
    rect = vehicle.footprint(at=pose)
    if margin > 0.0:
        cx = sum(p[0] for p in rect) / 4.0
        cy = sum(p[1] for p in rect) / 4.0
        k = 1.0 + margin
        rect = [(cx + (p[0] - cx) * k, cy + (p[1] - cy) * k) for p in rect]
    for ob in world.obstacles:
        if ob.physicality != "physical":
            continue
        poly = ob.moved(rel_t).polygon if ob.velocity != (0.0, 0.0) else ob.polygon
        if convex_intersects(rect, poly):
            return ob.id
    for sv in world.other_vehicles:
        if convex_intersects(rect, _scripted_polygon_at(sv, world.clock, rel_t)):
            return sv.id
    return None


# ---------------------------------------------------------------------------
# Path building helpers

def _speeds_to_times(arc: List[float], speeds: List[float]) -> List[float]:
    ts = [0.0]
    for i in range(1, len(arc)):
        ds = arc[i] - arc[i - 1]
        v = max(0.5 * (speeds[i - 1] + speeds[i]), 0.3)
        ts.append(ts[-1] + ds / v)
    return ts


def _build_trajectory(points: List[Point], speeds: List[float],
                      source: str, terminal: str,
                      crossed: Sequence[Tuple[str, ...]] = ()) -> Trajectory:
    n = len(points)
    headings = []
    for i in range(n):
        if i < n - 1:
            dx = points[i + 1][0] - points[i][0]
            dy = points[i + 1][1] - points[i][1]
        else:
            dx = points[i][0] - points[i - 1][0]
            dy = points[i][1] - points[i - 1][1]
        headings.append(math.atan2(dy, dx))
    arc = [0.0]
    for i in range(1, n):
        arc.append(arc[-1] + math.hypot(points[i][0] - points[i - 1][0],
                                        points[i][1] - points[i - 1][1]))
    ts = _speeds_to_times(arc, speeds)
    samples = [TrajectorySample(ts[i], Pose(points[i][0], points[i][1],
                                            headings[i]), speeds[i])
               for i in range(n)]
    return Trajectory(samples=samples, source_command=source,
                      terminal=terminal, crossed_logical=tuple(crossed))


def _stop_speed_profile(arc: List[float], v_cruise: float,
                        accel: float = 2.0, decel: float = 2.0,
                        v0: float = 0.0) -> List[float]:
    total = arc[-1]
    out = []
    for s in arc:
        v_acc = math.sqrt(max(v0 * v0 + 2.0 * accel * s, 0.0))
        v_dec = math.sqrt(max(2.0 * decel * (total - s), 0.0))
        out.append(min(v_cruise, v_acc if v_acc > 0.3 or s == 0.0 else 0.3,
                       v_dec))
    out[-1] = 0.0
    # keep interior speeds positive so times stay strictly increasing
    for i in range(1, len(out) - 1):
        if out[i] <= 0.0:
            out[i] = 0.3
    return out


def _transition_length(d: float, cfg: PlannerConfig) -> float:
    """Length of a cosine lateral transition keeping curvature comfortably
    under the kinematic bound."""
    target = 0.6 * cfg.max_curvature
    need = math.pi * math.sqrt(abs(d) / (2.0 * target)) if d != 0.0 else 0.0
    return max(cfg.min_transition, need)


def _cosine_offset(d0: float, d1: float, u: float) -> float:
    return d0 + (d1 - d0) * 0.5 * (1.0 - math.cos(math.pi * min(max(u, 0.0), 1.0)))


def _lane_crossings(frame: RouteFrame, s: float, d: float,
                    crossed: set):
    lane = frame.lane_at(s)
    half = 0.5 * lane.width
    if d > half and not lane.legal_to_cross_left:
        crossed.add(("lane_boundary", lane.id, "left"))
    elif d < -half and not lane.legal_to_cross_right:
        crossed.add(("lane_boundary", lane.id, "right"))


# ---------------------------------------------------------------------------
# Bypass

def plan_bypass(world: WorldState, side: str, *, route: RouteFrame,
                perception: Optional[PerceptionState] = None,
                cfg: PlannerConfig = DEFAULT_CFG) -> Union[Trajectory, PlanFailure]:
    """Corridor bypass around the obstacles blocking the ego lane."""
    if side not in ("left", "right"):
        return PlanFailure("bad_side", detail=str(side))
    sgn = 1.0 if side == "left" else -1.0
    veh = world.vehicle
    ref = route.ref
    s_ego, d_ego = ref.project(veh.pose.position())

    # blocking group: physical obstacles intersecting the ego lane corridor ahead
    blockers = []
    for ob in effective_physical(world, perception):
        lo_s, hi_s = math.inf, -math.inf
        in_corridor = False
        for p in ob.polygon:
            s, d = ref.project(p)
            lo_s, hi_s = min(lo_s, s), max(hi_s, s)
            lane = route.lane_at(s)
            if abs(d) <= 0.5 * lane.width + 0.3:
                in_corridor = True
        if in_corridor and hi_s > s_ego and lo_s < s_ego + cfg.bypass_search:
            blockers.append((ob, lo_s, hi_s))
    if not blockers:
        return PlanFailure("no_obstacle", detail="nothing blocks the ego lane")

    win_lo = min(b[1] for b in blockers)
    win_hi = max(b[2] for b in blockers)

    # lateral extent the footprint must clear, per candidate side
    d_req = 0.0
    for ob, _, _ in blockers:
        clear = _obstacle_clearance(ob, perception, cfg)
        ds = [ref.project(p)[1] for p in ob.polygon]
        if sgn > 0:
            d_req = max(d_req, max(ds) + clear + 0.5 * veh.width)
        else:
            d_req = max(d_req, -(min(ds) - clear - 0.5 * veh.width))
    d_req *= sgn

    # available room across the bypass window
    edge = sgn * math.inf
    for k in range(5):
        s = win_lo + (win_hi - win_lo) * k / 4.0
        lo, hi = drivable_interval(world, ref, s)
        edge = min(edge, hi) if sgn > 0 else max(edge, lo)
    room = (edge - 0.5 * veh.width - 0.1) if sgn > 0 else (edge + 0.5 * veh.width + 0.1)
    if sgn * (room - d_req) < 0.0:
        return PlanFailure("no_corridor", physical=False,
                           detail=f"need lateral {d_req:.2f}, room {room:.2f}")

    standoff = 4.0 + cfg.clearance_margin
    s_hold_a = max(win_lo - standoff, s_ego + 1.0)
    s_hold_b = win_hi + standoff

    candidates = []
    d = d_req
    while sgn * (room - d) >= 0.0:
        candidates.append(d)
        d += sgn * 0.25
    tried_collision = False
    for d_off in candidates:
        lt = _transition_length(d_off - d_ego, cfg)
        s_start = max(s_ego, s_hold_a - lt)
        lt_eff = s_hold_a - s_start
        if lt_eff < 4.0:
            return PlanFailure("no_corridor", physical=False,
                               detail="no room to transition before obstacle")
        lt_back = _transition_length(d_off, cfg)
        s_end = s_hold_b + lt_back
        tail = s_end + 3.0
        if tail > ref.length:
            tail = ref.length
        if s_end >= tail:
            return PlanFailure("no_corridor", physical=False,
                               detail="route ends inside bypass window")

        pts: List[Point] = []
        ds_list: List[float] = []
        s = s_start
        # include the run-up from the ego position so tracking starts on-path
        if s_start > s_ego + cfg.sample_ds:
            steps = int((s_start - s_ego) / cfg.sample_ds)
            for i in range(steps):
                si = s_ego + (s_start - s_ego) * i / steps
                u = (si - s_ego) / max(s_start - s_ego, 1e-9)
                pts.append(ref.offset_point(si, d_ego * (1.0 - u)))
                ds_list.append(d_ego * (1.0 - u))
        while s <= tail + 1e-9:
            if s < s_hold_a:
                u = (s - s_start) / lt_eff
                dv = _cosine_offset(d_ego, d_off, u)
            elif s <= s_hold_b:
                dv = d_off
            elif s <= s_end:
                u = (s - s_hold_b) / lt_back
                dv = _cosine_offset(d_off, 0.0, u)
            else:
                dv = 0.0
            pts.append(ref.offset_point(s, dv))
            ds_list.append(dv)
            s += cfg.sample_ds

        speeds = [cfg.maneuver_speed] * len(pts)
        traj = _build_trajectory(pts, speeds, f"Bypass{side.capitalize()}",
                                 "resume")
        # collision check against physical obstacles at sample times
        hit = None
        for smp in traj.samples:
            hit = _collides_timed(world, veh, smp.pose, smp.t, perception)
            if hit:
                break
        if hit:
            tried_collision = True
            continue
        crossed: set = set()
        arc = 0.0
        prev = None
        for p, dv in zip(pts, ds_list):
            if prev is not None:
                arc += math.hypot(p[0] - prev[0], p[1] - prev[1])
            prev = p
            s_here, _ = ref.project(p)
            _lane_crossings(route, s_here, dv, crossed)
        for smp in traj.samples:
            rect = veh.footprint(at=smp.pose)
            for ob in effective_logical(world, perception):
                if convex_intersects(rect, ob.polygon):
                    crossed.add(("obstacle", ob.id))
        traj = replace(traj, crossed_logical=tuple(sorted(crossed)))
        validate_trajectory(traj, cfg)
        return traj
    return PlanFailure("no_corridor", physical=tried_collision,
                       detail="every candidate offset collides"
                       if tried_collision else "no lateral room")


# ---------------------------------------------------------------------------
# Rerouting

@dataclass
class RouteQuery:
    from_lane: str
    from_s: float                      # arc position within from_lane
    goal_lane: str
    blocked: Tuple[str, ...] = ()


@dataclass
class RouteResult:
    lane_ids: List[str]
    length_m: float
    est_time_s: float
    length_delta_m: float = 0.0
    time_delta_s: float = 0.0


def _route_cost(world: WorldState, lanes: Sequence[str], from_s: float) -> Tuple[float, float]:
    length = 0.0
    time = 0.0
    for i, lane_id in enumerate(lanes):
        lane = world.road[lane_id]
        seg = lane.centerline.length - (from_s if i == 0 else 0.0)
        seg = max(seg, 0.0)
        length += seg
        time += seg / lane.speed_limit
    return length, time


def plan_reroute(world: WorldState, query: RouteQuery, *,
                 original_route: Optional[Sequence[str]] = None,
                 cfg: PlannerConfig = DEFAULT_CFG) -> Union[List[RouteResult], PlanFailure]:
    """Shortest-time lane paths to the goal, excluding blocked lanes."""
    blocked = set(query.blocked)
    g = nx.DiGraph()
    for lane in world.road.values():
        if lane.id in blocked and lane.id != query.from_lane:
            continue
        g.add_node(lane.id)
        for succ in lane.successors:
            if succ in blocked:
                continue
            succ_lane = world.road[succ]
            g.add_edge(lane.id, succ,
                       weight=succ_lane.centerline.length / succ_lane.speed_limit)
    if query.from_lane not in g or query.goal_lane not in g:
        return PlanFailure("no_route", detail="endpoint not in road graph")

    results: List[RouteResult] = []
    try:
        gen = nx.shortest_simple_paths(g, query.from_lane, query.goal_lane,
                                       weight="weight")
        for path in gen:
            length, time = _route_cost(world, path, query.from_s)
            results.append(RouteResult(lane_ids=list(path), length_m=length,
                                       est_time_s=time))
            if len(results) >= cfg.max_route_alternatives:
                break
    except (nx.NetworkXNoPath, nx.NodeNotFound):
        return PlanFailure("no_route")
    if not results:
        return PlanFailure("no_route")

    if original_route:
        # remaining part of the original route from the query position
        try:
            idx = list(original_route).index(query.from_lane)
            rem = list(original_route)[idx:]
            base_len, base_time = _route_cost(world, rem, query.from_s)
        except ValueError:
            base_len, base_time = results[0].length_m, results[0].est_time_s
        for r in results:
            r.length_delta_m = r.length_m - base_len
            r.time_delta_s = r.est_time_s - base_time
    return results


# ---------------------------------------------------------------------------
# Plotted routes and point-and-go

def _check_drivable_points(world: WorldState, points: Sequence[Point],
                           perception: Optional[PerceptionState]) -> Optional[int]:
    repurposed = perception.repurposed_patches if perception else ()
    for i, p in enumerate(points):
        if not point_on_road(world, p, repurposed):
            return i
    return None


def _spline_points(anchors: List[Point], ds: float) -> Tuple[List[Point], List[int]]:
    """Natural cubic spline through the anchors, resampled roughly every ds;
    also returns, per sample, the index of the anchor segment it belongs to."""
    from scipy.interpolate import CubicSpline
    import numpy as np

    chord = [0.0]
    for i in range(1, len(anchors)):
        chord.append(chord[-1] + max(math.hypot(
            anchors[i][0] - anchors[i - 1][0],
            anchors[i][1] - anchors[i - 1][1]), 1e-6))
    u = np.asarray(chord)
    xs = CubicSpline(u, [p[0] for p in anchors])
    ys = CubicSpline(u, [p[1] for p in anchors])
    n = max(int(chord[-1] / ds) + 2, 8)
    uu = np.linspace(0.0, chord[-1], n)
    pts = [(float(xs(t)), float(ys(t))) for t in uu]
    seg_idx = []
    j = 0
    for t in uu:
        while j + 1 < len(chord) - 1 and t > chord[j + 1]:
            j += 1
        seg_idx.append(j)
    return pts, seg_idx


def _curvature_violation(pts: List[Point], seg_idx: List[int],
                         cfg: PlannerConfig) -> Optional[int]:
    for i in range(1, len(pts) - 1):
        ax, ay = pts[i - 1]
        bx, by = pts[i]
        cx, cy = pts[i + 1]
        h1 = math.atan2(by - ay, bx - ax)
        h2 = math.atan2(cy - by, cx - bx)
        ds = 0.5 * (math.hypot(bx - ax, by - ay) + math.hypot(cx - bx, cy - by))
        if ds < 1e-6:
            continue
        if abs(angle_diff(h2, h1)) / ds > cfg.max_curvature:
            return seg_idx[i]
    return None


def _path_logical_report(world: WorldState, traj: Trajectory,
                         route: Optional[RouteFrame],
                         perception: Optional[PerceptionState]) -> Tuple:
    crossed: set = set()
    veh = world.vehicle
    for smp in traj.samples:
        rect = veh.footprint(at=smp.pose)
        for ob in effective_logical(world, perception):
            if convex_intersects(rect, ob.polygon):
                crossed.add(("obstacle", ob.id))
        if route is not None:
            s, d = route.ref.project((smp.pose.x, smp.pose.y))
            _lane_crossings(route, s, d, crossed)
    return tuple(sorted(crossed))


def plan_plotted_route(world: WorldState, points: Sequence[Point], *,
                       route: Optional[RouteFrame] = None,
                       perception: Optional[PerceptionState] = None,
                       cfg: PlannerConfig = DEFAULT_CFG,
                       source: str = "PlotAlternativeRoute") -> Union[Trajectory, PlanFailure]:
    """Smooth curvature-feasible path through operator tracing points,
    stopping at the last one."""
    if len(points) < 2:
        return PlanFailure("too_few_points")
    bad = _check_drivable_points(world, points, perception)
    if bad is not None:
        return PlanFailure("point_not_drivable", physical=True, index=bad)

    veh = world.vehicle
    start = (veh.pose.x + 0.5 * veh.wheelbase * math.cos(veh.pose.heading),
             veh.pose.y + 0.5 * veh.wheelbase * math.sin(veh.pose.heading))
    anchors = [start] + [tuple(p) for p in points]
    pts, seg_idx = _spline_points(anchors, cfg.sample_ds)
    bad_seg = _curvature_violation(pts, seg_idx, cfg)
    if bad_seg is not None:
        return PlanFailure("infeasible_segment", index=max(bad_seg - 1, 0))

    # footprint poses track the rear axle half a wheelbase behind the path
    poses = []
    for i, p in enumerate(pts):
        if i < len(pts) - 1:
            h = math.atan2(pts[i + 1][1] - p[1], pts[i + 1][0] - p[0])
        else:
            h = math.atan2(p[1] - pts[i - 1][1], p[0] - pts[i - 1][0])
        poses.append((p[0] - 0.5 * veh.wheelbase * math.cos(h),
                      p[1] - 0.5 * veh.wheelbase * math.sin(h)))

    arc = [0.0]
    for i in range(1, len(poses)):
        arc.append(arc[-1] + math.hypot(poses[i][0] - poses[i - 1][0],
                                        poses[i][1] - poses[i - 1][1]))
    speeds = _stop_speed_profile(arc, cfg.cruise_speed, v0=veh.speed)
    traj = _build_trajectory(poses, speeds, source, "stop")
    for smp in traj.samples:
        hit = _collides_timed(world, veh, smp.pose, smp.t, perception)
        if hit:
            return PlanFailure("blocked", physical=True, detail=hit)
    traj = replace(traj, crossed_logical=_path_logical_report(
        world, traj, route, perception))
    validate_trajectory(traj, cfg)
    return traj


def plan_point_and_go(world: WorldState, point: Point, *,
                      route: Optional[RouteFrame] = None,
                      perception: Optional[PerceptionState] = None,
                      cfg: PlannerConfig = DEFAULT_CFG) -> Union[Trajectory, PlanFailure]:
    """Straight corridor from the vehicle to a single map point."""
    veh = world.vehicle
    bad = _check_drivable_points(world, [point], perception)
    if bad is not None:
        return PlanFailure("point_not_drivable", physical=True, index=0)
    dx = point[0] - veh.pose.x
    dy = point[1] - veh.pose.y
    d = math.hypot(dx, dy)
    if d < 1.0:
        return PlanFailure("target_too_close")
    bearing = math.atan2(dy, dx)
    if abs(angle_diff(bearing, veh.pose.heading)) > 0.35:
        # fall back to a smooth plotted path when the target is off-axis
        return plan_plotted_route(
            world,
            [(veh.pose.x + 3.0 * math.cos(veh.pose.heading),
              veh.pose.y + 3.0 * math.sin(veh.pose.heading)), tuple(point)],
            cfg=cfg, route=route, perception=perception, source="PointAndGo")
    n = max(int(d / cfg.sample_ds) + 1, 2)
    pts = [(veh.pose.x + dx * i / (n - 1), veh.pose.y + dy * i / (n - 1))
           for i in range(n)]
    arc = [0.0]
    for i in range(1, n):
        arc.append(arc[-1] + math.hypot(pts[i][0] - pts[i - 1][0],
                                        pts[i][1] - pts[i - 1][1]))
    speeds = _stop_speed_profile(arc, cfg.cruise_speed, v0=veh.speed)
    traj = _build_trajectory(pts, speeds, "PointAndGo", "stop")
    for smp in traj.samples:
        hit = _collides_timed(world, veh, smp.pose, smp.t, perception)
        if hit:
            return PlanFailure("blocked", physical=True, detail=hit)
    traj = replace(traj, crossed_logical=_path_logical_report(
        world, traj, route, perception))
    validate_trajectory(traj, cfg)
    return traj


# ---------------------------------------------------------------------------
# U-turn

def min_turn_radius(vehicle: VehicleState, cfg: PlannerConfig = DEFAULT_CFG) -> float:
    return vehicle.wheelbase / math.tan(cfg.max_steer)


def u_turn_required_width(vehicle: VehicleState,
                          cfg: PlannerConfig = DEFAULT_CFG) -> float:
    """Geometric oracle: road width needed for a single-arc U-turn."""
    return 2.0 * min_turn_radius(vehicle, cfg) + vehicle.width + 0.6


def plan_u_turn(world: WorldState, *, route: RouteFrame,
                perception: Optional[PerceptionState] = None,
                cfg: PlannerConfig = DEFAULT_CFG) -> Union[Trajectory, PlanFailure]:
    veh = world.vehicle
    ref = route.ref
    s0, d0 = ref.project(veh.pose.position())
    lo, hi = drivable_interval(world, ref, s0)
    width = hi - lo
    if width < u_turn_required_width(veh, cfg):
        return PlanFailure("insufficient_width",
                           detail=f"road width {width:.2f}")
    rmin = min_turn_radius(veh)
    rmax = (hi - d0 - 0.5 * veh.width - 0.3) / 2.0
    pre_pts: List[Point] = []
    if rmax < rmin:
        # not enough room left of the current pose: slide right first so the
        # arc can use the full road width (which the width check guarantees)
        d_start = hi - 2.0 * rmin - 0.5 * veh.width - 0.3
        if d_start < lo + 0.5 * veh.width + 0.3 - 1e-9:
            return PlanFailure("insufficient_width",
                               detail="no room on the left of the vehicle")
        lt = _transition_length(abs(d_start - d0), cfg)
        s = s0
        while s <= s0 + lt - 1e-9:
            pre_pts.append(ref.offset_point(
                s, _cosine_offset(d0, d_start, (s - s0) / lt)))
            s += cfg.sample_ds
        start = ref.offset_point(s0 + lt, d_start)
        h0 = ref.heading_at(s0 + lt)
        r = rmin
    else:
        start = veh.pose.position()
        h0 = veh.pose.heading
        # aim at the opposite-direction lane centerline when reachable
        r = rmin
        for lane in world.road.values():
            ls, ld = lane.centerline.project(veh.pose.position())
            if ls <= 1e-6 or ls >= lane.centerline.length - 1e-6:
                continue
            lane_h = lane.centerline.heading_at(ls)
            if abs(abs(angle_diff(lane_h, veh.pose.heading)) - math.pi) < 0.5:
                # -ld: lateral of the lane center as seen from the ego point
                cand = -ld
                if cand > 0.5:
                    r = min(max(rmin, 0.5 * cand), rmax)
    cx = start[0] - r * math.sin(h0)
    cy = start[1] + r * math.cos(h0)
    n = max(int(math.pi * r / cfg.sample_ds), 16)

    def arc_samples(delay: float) -> Trajectory:
        pts = list(pre_pts)
        for i in range(n + 1):
            th = h0 - 0.5 * math.pi + math.pi * i / n
            pts.append((cx + r * math.cos(th), cy + r * math.sin(th)))
        speeds = [2.5] * len(pts)
        traj = _build_trajectory(pts, speeds, "UTurn", "resume")
        if delay > 0.0:
            held = [TrajectorySample(0.0, veh.pose, 0.0),
                    TrajectorySample(delay, veh.pose, 0.0)]
            shifted = [TrajectorySample(smp.t + delay + 0.2, smp.pose, smp.speed)
                       for smp in traj.samples]
            traj = Trajectory(held + shifted, "UTurn", "resume")
        return traj

    delay = 0.0
    while delay <= cfg.dynamic_horizon:
        traj = arc_samples(delay)
        hit = None
        for smp in traj.samples:
            hit = _collides_timed(world, veh, smp.pose, smp.t, perception)
            if hit:
                break
        if hit is None:
            traj = replace(traj, crossed_logical=_path_logical_report(
                world, traj, route, perception))
            return traj
        delay += 0.5
    return PlanFailure("no_gap", physical=True,
                       detail="no conflict-free start within horizon")


# ---------------------------------------------------------------------------
# Creep, gap keep, snap, stop

def creep_step(world: WorldState, distance: float, *,
               perception: Optional[PerceptionState] = None,
               cfg: PlannerConfig = DEFAULT_CFG) -> Union[Trajectory, PlanFailure]:
    """Straight creep of exactly `distance` meters at creep speed, then stop."""
    if not 0.0 < distance <= 10.0:
        return PlanFailure("bad_distance", detail=str(distance))
    veh = world.vehicle
    h = veh.pose.heading
    cos_h, sin_h = math.cos(h), math.sin(h)

    # swept volume: corridor covering [rear bumper, front bumper + distance + margin]
    from .geometry import rect_corners
    mid = 0.5 * veh.wheelbase + 0.5 * distance + 0.15
    corridor = rect_corners(veh.pose.x + mid * cos_h, veh.pose.y + mid * sin_h,
                            h, veh.length + distance + 0.3, veh.width + 0.2)
    for ob in effective_physical(world, perception):
        if convex_intersects(corridor, ob.polygon):
            return PlanFailure("blocked", physical=True, detail=ob.id)

    a = cfg.creep_accel
    vc = min(cfg.creep_speed, math.sqrt(a * distance))
    s_ramp = vc * vc / (2.0 * a)
    s_cruise = max(distance - 2.0 * s_ramp, 0.0)
    t_ramp = vc / a
    t_cruise = s_cruise / vc if vc > 0.0 else 0.0
    total_t = 2.0 * t_ramp + t_cruise

    def s_of(t: float) -> Tuple[float, float]:
        if t <= t_ramp:
            return 0.5 * a * t * t, a * t
        if t <= t_ramp + t_cruise:
            return s_ramp + vc * (t - t_ramp), vc
        td = t - t_ramp - t_cruise
        return s_ramp + s_cruise + vc * td - 0.5 * a * td * td, max(vc - a * td, 0.0)

    samples = []
    t = 0.0
    while t < total_t:
        s, v = s_of(t)
        samples.append(TrajectorySample(
            t, Pose(veh.pose.x + s * cos_h, veh.pose.y + s * sin_h, h), v))
        t += 0.05
    samples.append(TrajectorySample(
        total_t, Pose(veh.pose.x + distance * cos_h,
                      veh.pose.y + distance * sin_h, h), 0.0))
    traj = Trajectory(samples, "ProgressSlowly", "stop")
    # moving traffic: check the timed samples, then a dwell window at the
    # terminal pose — a creep must not park where traffic is about to pass
    for smp in traj.samples:
        hit = _collides_timed(world, veh, smp.pose, smp.t, perception)
        if hit:
            return PlanFailure("blocked", physical=True, detail=hit)
    final = traj.samples[-1]
    t = total_t
    while t <= total_t + cfg.dynamic_horizon:
        hit = _collides_timed(world, veh, final.pose, t, perception)
        if hit:
            return PlanFailure("blocked", physical=True, detail=hit)
        t += 0.5
    validate_trajectory(traj, cfg)
    return traj


def find_lead(world: WorldState, route: RouteFrame,
              cfg: PlannerConfig = DEFAULT_CFG):
    """Nearest in-lane vehicle/dynamic obstacle ahead; None when absent.
    Returns (id, bumper_distance, lead_speed)."""
    veh = world.vehicle
    ref = route.ref
    s_ego, _ = ref.project(veh.pose.position())
    front = s_ego + 0.5 * veh.wheelbase + 0.5 * veh.length
    best = None
    for ob in effective_physical(world, None):
        if ob.kind not in ("dynamic",) and "vehicle" not in ob.tags:
            continue
        cx = sum(p[0] for p in ob.polygon) / len(ob.polygon)
        cy = sum(p[1] for p in ob.polygon) / len(ob.polygon)
        s, d = ref.project((cx, cy))
        lane = route.lane_at(s)
        if abs(d) > 0.5 * lane.width:
            continue
        half_len = 0.5 * max(
            math.hypot(ob.polygon[i][0] - ob.polygon[j][0],
                       ob.polygon[i][1] - ob.polygon[j][1])
            for i in range(len(ob.polygon)) for j in range(len(ob.polygon)))
        rear = s - half_len
        gap = rear - front
        if gap <= -1.0 or s - s_ego > 80.0:
            continue
        spd = math.hypot(*ob.velocity)
        if best is None or gap < best[1]:
            best = (ob.id, max(gap, 0.0), spd)
    return best


def gap_keep_tick(world: WorldState, target_gap: float, *,
                  route: RouteFrame,
                  cfg: PlannerConfig = DEFAULT_CFG) -> Union[float, PlanFailure]:
    """Proportional time-gap controller; returns the commanded acceleration."""
    lead = find_lead(world, route, cfg)
    if lead is None:
        return PlanFailure("lead_lost")
    _, dist, _ = lead
    if dist <= cfg.gap_standoff:
        return cfg.gap_accel_min
    gap = dist / max(world.vehicle.speed, 0.1)
    accel = cfg.gap_gain * (gap - target_gap)
    return min(max(accel, cfg.gap_accel_min), cfg.gap_accel_max)


def snap_offset(world: WorldState, side: str, *, route: RouteFrame,
                cfg: PlannerConfig = DEFAULT_CFG) -> Union[Trajectory, PlanFailure]:
    """Lateral in-lane shift toward the requested side, then hold."""
    if side not in ("left", "right"):
        return PlanFailure("bad_side", detail=str(side))
    sgn = 1.0 if side == "left" else -1.0
    veh = world.vehicle
    ref = route.ref
    s0, d0 = ref.project(veh.pose.position())
    lane = route.lane_at(s0)
    offset = 0.5 * lane.width - 0.5 * veh.width - cfg.snap_edge_margin
    target = d0 + sgn * offset
    if abs(target) > 0.5 * lane.width - 0.5 * veh.width + 1e-6:
        return PlanFailure("no_room",
                           detail=f"target lateral {target:.2f} leaves the lane")
    lt = _transition_length(target - d0, cfg)
    hold = 4.0
    pts = []
    s = s0
    while s <= s0 + lt + hold + 1e-9:
        if s <= s0 + lt:
            dv = _cosine_offset(d0, target, (s - s0) / lt)
        else:
            dv = target
        pts.append(ref.offset_point(s, dv))
        s += cfg.sample_ds
    arc = [0.0]
    for i in range(1, len(pts)):
        arc.append(arc[-1] + math.hypot(pts[i][0] - pts[i - 1][0],
                                        pts[i][1] - pts[i - 1][1]))
    speeds = _stop_speed_profile(arc, max(veh.speed, 2.0), v0=max(veh.speed, 2.0))
    traj = _build_trajectory(pts, speeds, f"Snap{side.capitalize()}", "stop")
    validate_trajectory(traj, cfg)
    return traj


def stop_profile(world: WorldState,
                 cfg: PlannerConfig = DEFAULT_CFG) -> Trajectory:
    """Constant -3 m/s^2 ramp to standstill along the current heading."""
    veh = world.vehicle
    v0 = veh.speed
    h = veh.pose.heading
    if v0 <= 1e-9:
        return Trajectory([TrajectorySample(0.0, veh.pose, 0.0)], "Stop", "stop")
    a = 3.0
    total_t = v0 / a
    cos_h, sin_h = math.cos(h), math.sin(h)
    samples = []
    t = 0.0
    while t < total_t:
        s = v0 * t - 0.5 * a * t * t
        samples.append(TrajectorySample(
            t, Pose(veh.pose.x + s * cos_h, veh.pose.y + s * sin_h, h),
            v0 - a * t))
        t += 0.05
    s_end = v0 * v0 / (2.0 * a)
    samples.append(TrajectorySample(
        total_t, Pose(veh.pose.x + s_end * cos_h, veh.pose.y + s_end * sin_h, h),
        0.0))
    traj = Trajectory(samples, "Stop", "stop")
    validate_trajectory(traj, cfg)
    return traj


# ---------------------------------------------------------------------------
# Tracking

class TrajectoryFollower:
    """Tracker producing per-tick (accel, steer).

    Steering is pure pursuit on the spatial path; speed tracks the time-
    indexed profile, which under the simulator's Euler update reproduces the
    planned speeds exactly and lands terminal stops on the planned arc length.
    """

    DONE = "done"
    ABORT_DIVERGED = "diverged"

    def __init__(self, traj: Trajectory, cfg: PlannerConfig = DEFAULT_CFG):
        from .world import DT
        self.traj = traj
        self.cfg = cfg
        self.dt = DT
        self.path = traj.path()
        self.progress = 0.0
        self.ticks = 0
        self.status: Optional[str] = None

    def _speed_at_time(self, t: float) -> float:
        samples = self.traj.samples
        if t <= samples[0].t:
            return samples[0].speed
        for i in range(1, len(samples)):
            if samples[i].t >= t:
                a, b = samples[i - 1], samples[i]
                u = (t - a.t) / (b.t - a.t)
                return a.speed + u * (b.speed - a.speed)
        return 0.0 if self.traj.terminal == "stop" else samples[-1].speed

    def cross_track(self, world: WorldState) -> float:
        if self.path is None:
            return 0.0
        _, d = self.path.project(world.vehicle.pose.position())
        return abs(d)

    def tick(self, world: WorldState) -> Tuple[float, float]:
        veh = world.vehicle
        cfg = self.cfg
        t_rel = self.ticks * self.dt
        self.ticks += 1

        if self.path is None:
            # zero-motion trajectory: just brake to rest
            if veh.speed <= 1e-12:
                self.status = self.DONE
                return (0.0, 0.0)
            return (-cfg.max_accel, 0.0)

        s, d = self.path.project(veh.pose.position())
        s = max(s, self.progress)
        self.progress = s
        if abs(d) > 1.0:
            self.status = self.ABORT_DIVERGED
            return (0.0, 0.0)
        end = self.path.length

        if self.traj.terminal == "resume" and s >= end - 0.3:
            self.status = self.DONE
            return (0.0, 0.0)
        if self.traj.terminal == "stop" and t_rel >= self.traj.duration \
                and veh.speed <= 1e-12:
            self.status = self.DONE
            return (0.0, 0.0)

        ld = min(max(cfg.lookahead_gain * veh.speed + 1.0, cfg.lookahead_min),
                 cfg.lookahead_max)
        tx, ty = self.path.point_at(min(s + ld, end))
        dx = tx - veh.pose.x
        dy = ty - veh.pose.y
        dist = math.hypot(dx, dy)
        steer = 0.0
        if dist > 1e-6:
            alpha = angle_diff(math.atan2(dy, dx), veh.pose.heading)
            steer = math.atan2(2.0 * veh.wheelbase * math.sin(alpha), dist)
            steer = min(max(steer, -cfg.max_steer), cfg.max_steer)

        v_next = self._speed_at_time(t_rel + self.dt)
        accel = (v_next - veh.speed) / self.dt
        accel = min(max(accel, -cfg.max_accel), 2.0)
        return (accel, steer)
