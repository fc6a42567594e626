"""Deterministic 2D world model: road network, vehicle kinematics, obstacles,
scenario fixtures.

The world advances with a fixed-step kinematic bicycle update; everything is
plain arithmetic on floats so identical inputs reproduce bit-identical traces.
"""
from __future__ import annotations

import copy
import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple

from .geometry import (Point, Polyline, convex_intersects, ensure_ccw,
                       is_convex, normalize_angle, rect_corners)

# Fixture-wide constants (typical sedan; fixtures may override vehicle dims).
MAX_STEER = 0.6       # rad
MAX_ACCEL = 3.0       # m/s^2
DT = 0.05             # s, fixed tick
SCHEMA_VERSION = 1

SCENARIO_IDS = ("police_block", "busy_junction", "static_obstacle")


class WorldError(Exception):
    pass


class InvalidControlError(WorldError):
    pass


class FixtureError(WorldError):
    """Malformed or unknown scenario fixture; message names the bad field."""


@dataclass
class Pose:
    x: float
    y: float
    heading: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)
                and math.isfinite(self.heading)):
            raise WorldError("non-finite pose")
        self.heading = normalize_angle(self.heading)

    def as_tuple(self) -> Tuple[float, float, float]:
        return (self.x, self.y, self.heading)

    def position(self) -> Point:
        return (self.x, self.y)


@dataclass
class VehicleState:
    pose: Pose
    speed: float
    wheelbase: float = 2.7
    length: float = 4.5
    width: float = 1.8
    brake_active: bool = False

    def __post_init__(self):
        if self.speed < 0.0:
            raise WorldError("speed must be >= 0")
        if self.wheelbase <= 0.0 or self.length <= self.wheelbase:
            raise WorldError("footprint length must exceed wheelbase > 0")

    def footprint(self, at: Optional[Pose] = None) -> List[Point]:
        """Oriented rectangle; the pose sits at the rear axle, the footprint
        center half a wheelbase ahead of it."""
        p = at if at is not None else self.pose
        cx = p.x + 0.5 * self.wheelbase * math.cos(p.heading)
        cy = p.y + 0.5 * self.wheelbase * math.sin(p.heading)
        return rect_corners(cx, cy, p.heading, self.length, self.width)


@dataclass
class LaneSegment:
    id: str
    centerline: Polyline
    width: float
    legal_to_cross_left: bool
    legal_to_cross_right: bool
    speed_limit: float
    successors: List[str] = field(default_factory=list)


@dataclass
class Obstacle:
    id: str
    kind: str                      # static | dynamic | unknown
    polygon: List[Point]           # convex, CCW
    velocity: Tuple[float, float] = (0.0, 0.0)
    physicality: str = "physical"  # physical | logical
    tags: Tuple[str, ...] = ()

    def moved(self, dt: float) -> "Obstacle":
        vx, vy = self.velocity
        if vx == 0.0 and vy == 0.0:
            return self
        poly = [(x + vx * dt, y + vy * dt) for x, y in self.polygon]
        return replace(self, polygon=poly)


@dataclass
class SurfacePatch:
    """Non-road surface (e.g. pavement); drivable only after repurposing."""
    id: str
    polygon: List[Point]
    drivable: bool = False


@dataclass
class ScriptedVehicle:
    """Other traffic following a piecewise-constant-velocity timeline."""
    id: str
    x: float
    y: float
    heading: float
    length: float = 4.5
    width: float = 1.8
    timeline: List[Tuple[float, float, float]] = field(default_factory=list)

    def velocity_at(self, t: float) -> Tuple[float, float]:
        vx = vy = 0.0
        for t0, sx, sy in self.timeline:
            if t0 <= t + 1e-9:
                vx, vy = sx, sy
            else:
                break
        return vx, vy

    def advanced(self, t: float, dt: float) -> "ScriptedVehicle":
        vx, vy = self.velocity_at(t)
        heading = self.heading
        if vx != 0.0 or vy != 0.0:
            heading = math.atan2(vy, vx)
        return replace(self, x=self.x + vx * dt, y=self.y + vy * dt,
                       heading=heading)

    def footprint(self) -> List[Point]:
        return rect_corners(self.x, self.y, self.heading, self.length, self.width)

    def position_at(self, t: float) -> Tuple[float, float]:
        """Closed-form position at absolute clock t (timeline starts at 0)."""
        x, y = self.x, self.y
        marks = [t0 for t0, _, _ in self.timeline]
        for i, (t0, vx, vy) in enumerate(self.timeline):
            t1 = marks[i + 1] if i + 1 < len(marks) else math.inf
            if t <= t0:
                break
            span = min(t, t1) - t0
            x += vx * span
            y += vy * span
        return x, y


@dataclass
class DisengagementReason:
    kind: str                      # ObstacleOnRoute | MergeBlocked | RoadBlockedByAuthority | Unknown
    detail: str = ""
    detected_object_ids: Tuple[str, ...] = ()

    def __post_init__(self):
        if self.kind == "Unknown" and self.detected_object_ids:
            raise WorldError("Unknown reason cannot carry detected objects")


@dataclass
class WorldState:
    clock: float
    vehicle: VehicleState
    obstacles: List[Obstacle]
    road: Dict[str, LaneSegment]
    patches: List[SurfacePatch] = field(default_factory=list)
    traffic_signs: List[Tuple[str, str]] = field(default_factory=list)
    other_vehicles: List[ScriptedVehicle] = field(default_factory=list)


@dataclass
class Scenario:
    id: str
    initial_world: WorldState
    disengagement: DisengagementReason
    goal_region: List[Point]
    route_plan: List[str]


def step(world: WorldState, controls: Tuple[float, float], dt: float) -> WorldState:
    """Advance one tick with the kinematic bicycle model.

    controls = (accel m/s^2, steer_angle rad). Scripted traffic and dynamic
    obstacles advance along their timelines; the clock moves by dt.
    """
    accel, steer = controls
    if not (math.isfinite(accel) and math.isfinite(steer)):
        raise InvalidControlError("non-finite control")
    if not (0.0 < dt <= 0.1):
        raise InvalidControlError(f"dt {dt} outside (0, 0.1]")
    if abs(steer) > MAX_STEER + 1e-9:
        raise InvalidControlError(f"steer {steer} exceeds max {MAX_STEER}")

    v = world.vehicle
    p = v.pose
    spd = v.speed
    x = p.x + spd * math.cos(p.heading) * dt
    y = p.y + spd * math.sin(p.heading) * dt
    heading = normalize_angle(
        p.heading + spd / v.wheelbase * math.tan(steer) * dt)
    new_speed = max(0.0, spd + accel * dt)
    vehicle = replace(v, pose=Pose(x, y, heading), speed=new_speed,
                      brake_active=accel < 0.0)
    others = [sv.advanced(world.clock, dt) for sv in world.other_vehicles]
    obstacles = [ob.moved(dt) for ob in world.obstacles]
    return replace(world, clock=world.clock + dt, vehicle=vehicle,
                   obstacles=obstacles, other_vehicles=others)


def collision_check(footprint_at: Pose, vehicle: VehicleState,
                    obstacles: Sequence[Obstacle]) -> bool:
    """True iff the vehicle rectangle placed at footprint_at touches any
    obstacle polygon (boundary contact included)."""
    rect = vehicle.footprint(at=footprint_at)
    for ob in obstacles:
        if convex_intersects(rect, ob.polygon):
            return True
    return False


def physical_obstacle_views(world: WorldState) -> List[Obstacle]:
    """Physical obstacles plus scripted traffic rendered as dynamic obstacles."""
    out = [ob for ob in world.obstacles if ob.physicality == "physical"]
    for sv in world.other_vehicles:
        out.append(Obstacle(id=sv.id, kind="dynamic", polygon=sv.footprint(),
                            velocity=sv.velocity_at(world.clock),
                            physicality="physical"))
    return out


def logical_obstacles(world: WorldState) -> List[Obstacle]:
    return [ob for ob in world.obstacles if ob.physicality == "logical"]


def route_polyline(road: Dict[str, LaneSegment], route: Sequence[str]) -> Polyline:
    pts: List[Point] = []
    for lane_id in route:
        lane = road[lane_id]
        for p in lane.centerline.points:
            if pts and math.hypot(p[0] - pts[-1][0], p[1] - pts[-1][1]) < 1e-9:
                continue
            pts.append(p)
    return Polyline(pts)


def drivable_interval(world: WorldState, ref: Polyline, s: float) -> Tuple[float, float]:
    """Lateral road extent (right_edge, left_edge) at arc position s of ref,
    merging the corridors of all lanes that overlap the reference point."""
    origin = ref.point_at(s)
    h = ref.heading_at(s)
    nx, ny = -math.sin(h), math.cos(h)        # left normal of the reference
    intervals = []
    for lane in world.road.values():
        ls, _ = lane.centerline.project(origin)
        if ls <= 1e-6 or ls >= lane.centerline.length - 1e-6:
            continue  # reference point beyond this lane's longitudinal extent
        # lane-center lateral measured in the reference frame, so lanes
        # running the opposite direction land on the correct side
        qx, qy = lane.centerline.point_at(ls)
        center = (qx - origin[0]) * nx + (qy - origin[1]) * ny
        intervals.append((center - 0.5 * lane.width, center + 0.5 * lane.width))
    if not intervals:
        return (0.0, 0.0)
    intervals.sort()
    chains = []
    lo, hi = intervals[0]
    for a, b in intervals[1:]:
        if a <= hi + 0.2:
            hi = max(hi, b)
        else:
            chains.append((lo, hi))
            lo, hi = a, b
    chains.append((lo, hi))
    for lo, hi in chains:
        if lo - 1e-9 <= 0.0 <= hi + 1e-9:
            return (lo, hi)
    return min(chains, key=lambda c: min(abs(c[0]), abs(c[1])))


def point_on_road(world: WorldState, p: Point, repurposed: Sequence[str] = ()) -> bool:
    """Drivable test: inside some lane corridor or a repurposed patch."""
    for lane in world.road.values():
        s, d = lane.centerline.project(p)
        if abs(d) <= 0.5 * lane.width and 0.0 <= s <= lane.centerline.length:
            return True
    from .geometry import convex_contains
    for patch in world.patches:
        if (patch.drivable or patch.id in repurposed) and \
                convex_contains(patch.polygon, p):
            return True
    return False


def in_goal_region(scenario: Scenario, world: WorldState) -> bool:
    from .geometry import convex_contains
    v = world.vehicle
    cx = v.pose.x + 0.5 * v.wheelbase * math.cos(v.pose.heading)
    cy = v.pose.y + 0.5 * v.wheelbase * math.sin(v.pose.heading)
    return convex_contains(scenario.goal_region, (cx, cy))


# ---------------------------------------------------------------------------
# Fixture loading

def _req(doc: dict, key: str, ctx: str):
    if key not in doc:
        raise FixtureError(f"{ctx}.{key}: missing")
    return doc[key]


def _parse_polygon(raw, ctx: str) -> List[Point]:
    if not isinstance(raw, list) or len(raw) < 3:
        raise FixtureError(f"{ctx}: polygon needs >= 3 vertices")
    poly = ensure_ccw([(float(p[0]), float(p[1])) for p in raw])
    if not is_convex(poly):
        raise FixtureError(f"{ctx}: polygon must be convex and non-self-intersecting")
    return poly


def parse_scenario(doc: dict) -> Scenario:
    if _req(doc, "schema_version", "fixture") != SCHEMA_VERSION:
        raise FixtureError("fixture.schema_version: unsupported")
    sid = _req(doc, "id", "fixture")

    vraw = _req(doc, "vehicle", "fixture")
    try:
        vehicle = VehicleState(
            pose=Pose(float(vraw["x"]), float(vraw["y"]), float(vraw["heading"])),
            speed=float(vraw.get("speed", 0.0)),
            wheelbase=float(vraw.get("wheelbase", 2.7)),
            length=float(vraw.get("length", 4.5)),
            width=float(vraw.get("width", 1.8)))
    except (KeyError, TypeError, ValueError, WorldError) as e:
        raise FixtureError(f"fixture.vehicle: {e}") from e

    road: Dict[str, LaneSegment] = {}
    for i, lraw in enumerate(_req(doc, "lanes", "fixture")):
        ctx = f"fixture.lanes[{i}]"
        try:
            lane = LaneSegment(
                id=str(_req(lraw, "id", ctx)),
                centerline=Polyline(_req(lraw, "centerline", ctx)),
                width=float(_req(lraw, "width", ctx)),
                legal_to_cross_left=bool(lraw.get("cross_left", False)),
                legal_to_cross_right=bool(lraw.get("cross_right", False)),
                speed_limit=float(_req(lraw, "speed_limit", ctx)),
                successors=[str(x) for x in lraw.get("successors", [])])
        except (TypeError, ValueError) as e:
            raise FixtureError(f"{ctx}: {e}") from e
        if lane.width <= vehicle.width:
            raise FixtureError(f"{ctx}.width: must exceed vehicle width")
        if lane.speed_limit <= 0.0:
            raise FixtureError(f"{ctx}.speed_limit: must be > 0")
        road[lane.id] = lane
    for lane in road.values():
        for succ in lane.successors:
            if succ not in road:
                raise FixtureError(f"fixture.lanes[{lane.id}].successors: unknown lane {succ!r}")

    obstacles = []
    for i, oraw in enumerate(doc.get("obstacles", [])):
        ctx = f"fixture.obstacles[{i}]"
        kind = oraw.get("kind", "static")
        if kind not in ("static", "dynamic", "unknown"):
            raise FixtureError(f"{ctx}.kind: {kind!r} invalid")
        vel = tuple(float(v) for v in oraw.get("velocity", (0.0, 0.0)))
        if kind == "static" and vel != (0.0, 0.0):
            raise FixtureError(f"{ctx}.velocity: static obstacle must be at rest")
        phys = oraw.get("physicality", "physical")
        if phys not in ("physical", "logical"):
            raise FixtureError(f"{ctx}.physicality: {phys!r} invalid")
        obstacles.append(Obstacle(
            id=str(_req(oraw, "id", ctx)), kind=kind,
            polygon=_parse_polygon(_req(oraw, "polygon", ctx), ctx + ".polygon"),
            velocity=vel, physicality=phys,
            tags=tuple(oraw.get("tags", []))))

    patches = [SurfacePatch(id=str(_req(p, "id", f"fixture.patches[{i}]")),
                            polygon=_parse_polygon(p["polygon"], f"fixture.patches[{i}].polygon"),
                            drivable=bool(p.get("drivable", False)))
               for i, p in enumerate(doc.get("patches", []))]

    others = []
    for i, sraw in enumerate(doc.get("other_vehicles", [])):
        ctx = f"fixture.other_vehicles[{i}]"
        others.append(ScriptedVehicle(
            id=str(_req(sraw, "id", ctx)),
            x=float(_req(sraw, "x", ctx)), y=float(_req(sraw, "y", ctx)),
            heading=float(sraw.get("heading", 0.0)),
            length=float(sraw.get("length", 4.5)),
            width=float(sraw.get("width", 1.8)),
            timeline=[(float(t["t"]), float(t["vx"]), float(t["vy"]))
                      for t in sraw.get("timeline", [])]))

    draw = _req(doc, "disengagement", "fixture")
    kind = _req(draw, "kind", "fixture.disengagement")
    if kind not in ("ObstacleOnRoute", "MergeBlocked", "RoadBlockedByAuthority", "Unknown"):
        raise FixtureError(f"fixture.disengagement.kind: {kind!r} invalid")
    disengagement = DisengagementReason(
        kind=kind, detail=str(draw.get("detail", "")),
        detected_object_ids=tuple(draw.get("objects", [])))

    route_plan = [str(x) for x in _req(doc, "route_plan", "fixture")]
    for lane_id in route_plan:
        if lane_id not in road:
            raise FixtureError(f"fixture.route_plan: unknown lane {lane_id!r}")

    world = WorldState(
        clock=0.0, vehicle=vehicle, obstacles=obstacles, road=road,
        patches=patches,
        traffic_signs=[(str(s["kind"]), str(s["lane"]))
                       for s in doc.get("traffic_signs", [])],
        other_vehicles=others)

    goal = _parse_polygon(_req(doc, "goal_region", "fixture"), "fixture.goal_region")

    # vehicle must start on the planned route
    ref = route_polyline(road, route_plan)
    _, d = ref.project(vehicle.pose.position())
    if abs(d) > road[route_plan[0]].width:
        raise FixtureError("fixture.vehicle: initial pose not on route_plan")

    return Scenario(id=sid, initial_world=world, disengagement=disengagement,
                    goal_region=goal, route_plan=route_plan)


def load_scenario_file(path) -> Scenario:
    with open(path, "r", encoding="utf-8") as fh:
        try:
            doc = json.load(fh)
        except json.JSONDecodeError as e:
            raise FixtureError(f"fixture: invalid JSON ({e})") from e
    return parse_scenario(doc)


def load_scenario(scenario_id: str) -> Scenario:
    if scenario_id not in SCENARIO_IDS:
        raise FixtureError(f"unknown scenario id {scenario_id!r}")
    ref = resources.files("teleopsim.data.scenarios").joinpath(f"{scenario_id}.json")
    doc = json.loads(ref.read_text(encoding="utf-8"))
    return parse_scenario(doc)


def clone_world(world: WorldState) -> WorldState:
    return copy.deepcopy(world)
