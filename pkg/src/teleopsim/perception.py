"""Scene-object selection, operator classification/annotation, and the
on-screen overlay computation (obstacle rings, brake wall, path projection)."""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Set, Tuple

from .geometry import (Point, convex_contains, point_polygon_distance,
                       polygon_centroid)
from .world import Obstacle, SurfacePatch, WorldState

SELECTION_RADIUS = 1.0      # m, touch-target tolerance
PROJECTION_HORIZON = 3.0    # s

CLASSES = ("free_space", "static_object", "dynamic_object", "unclassified")
SEMANTIC_EFFECTS = ("repurpose_drivable", "mark_ignorable", "mark_hazard", "none")


class PerceptionError(Exception):
    pass


@dataclass
class SceneObject:
    object_id: str
    selectable: bool
    current_class: str
    is_surface: bool = False


@dataclass
class Annotation:
    object_id: str
    label: str
    semantic_effect: str
    author: str
    clock: float

    def __post_init__(self):
        if self.semantic_effect not in SEMANTIC_EFFECTS:
            raise PerceptionError(f"unknown semantic effect {self.semantic_effect!r}")


@dataclass
class PerceptionState:
    """Operator-supplied scene knowledge; append-only and replayable."""
    classifications: Dict[str, str] = field(default_factory=dict)
    annotations: List[Annotation] = field(default_factory=list)
    repurposed_patches: Set[str] = field(default_factory=set)
    ignorable: Set[str] = field(default_factory=set)
    hazards: Set[str] = field(default_factory=set)

    def effective_logical(self, ob: Obstacle) -> bool:
        """A logical obstacle classified free_space or marked ignorable is a
        non-entity; physical obstacles never downgrade."""
        if ob.physicality != "logical":
            return False
        if self.classifications.get(ob.id) == "free_space":
            return False
        if ob.id in self.ignorable:
            return False
        return True


def _candidates(world: WorldState):
    for ob in world.obstacles:
        yield ob.id, ob.polygon, False
    for patch in world.patches:
        yield patch.id, patch.polygon, True
    for sv in world.other_vehicles:
        yield sv.id, sv.footprint(), False


def select_object(world: WorldState, point: Point,
                  state: Optional[PerceptionState] = None) -> Optional[SceneObject]:
    """Nearest selectable object containing or within 1 m of the point;
    deterministic smaller-id tie-break."""
    best = None
    for oid, poly, is_surface in _candidates(world):
        d = point_polygon_distance(point, poly)
        if d > SELECTION_RADIUS:
            continue
        key = (round(d, 9), oid)
        if best is None or key < best[0]:
            best = (key, oid, is_surface)
    if best is None:
        return None
    _, oid, is_surface = best
    cls = (state.classifications.get(oid, "unclassified")
           if state is not None else "unclassified")
    return SceneObject(object_id=oid, selectable=True, current_class=cls,
                       is_surface=is_surface)


def classify_object(state: PerceptionState, obj: SceneObject,
                    new_class: str) -> SceneObject:
    if new_class not in CLASSES:
        raise PerceptionError(f"unknown class {new_class!r}")
    if not obj.selectable:
        raise PerceptionError("object not selectable")
    if obj.is_surface and new_class == "dynamic_object":
        raise PerceptionError("a surface patch cannot be classified dynamic")
    state.classifications[obj.object_id] = new_class
    return replace(obj, current_class=new_class)


def annotate(state: PerceptionState, world: WorldState,
             annotation: Annotation) -> PerceptionState:
    effect = annotation.semantic_effect
    if effect == "repurpose_drivable":
        patch_ids = {p.id for p in world.patches}
        if annotation.object_id not in patch_ids:
            raise PerceptionError(
                "repurpose_drivable applies only to surface patches")
        state.repurposed_patches.add(annotation.object_id)
    elif effect == "mark_ignorable":
        state.ignorable.add(annotation.object_id)
    elif effect == "mark_hazard":
        state.hazards.add(annotation.object_id)
    state.annotations.append(annotation)
    return state


@dataclass
class OverlaySet:
    obstacle_markers: List[Tuple[str, Point, float]]   # (id, center, radius)
    brake_wall: Optional[List[Point]]
    trajectory_projection: List[Point]
    projection_length: float

    def to_json(self) -> dict:
        return {
            "obstacle_markers": [
                {"id": oid, "center": [c[0], c[1]], "radius": r}
                for oid, c, r in self.obstacle_markers],
            "brake_wall": ([[p[0], p[1]] for p in self.brake_wall]
                           if self.brake_wall else None),
            "trajectory_projection": [[p[0], p[1]]
                                      for p in self.trajectory_projection],
            "projection_length": self.projection_length,
        }


def _marker_for(poly: Sequence[Point]) -> Tuple[Point, float]:
    c = polygon_centroid(poly)
    r = max(math.hypot(p[0] - c[0], p[1] - c[1]) for p in poly) + 0.5
    return c, r


def compute_overlays(world: WorldState, active_trajectory,
                     detected_ids: Sequence[str] = ()) -> OverlaySet:
    markers = []
    ids = set(detected_ids)
    for ob in world.obstacles:
        if ob.id in ids:
            markers.append((ob.id, *_marker_for(ob.polygon)))
    for sv in world.other_vehicles:
        if sv.id in ids:
            markers.append((sv.id, *_marker_for(sv.footprint())))

    v = world.vehicle
    h = v.pose.heading
    cos_h, sin_h = math.cos(h), math.sin(h)

    brake_wall = None
    if v.brake_active:
        ahead = 0.5 * v.wheelbase + 0.5 * v.length + 1.0
        bx = v.pose.x + ahead * cos_h
        by = v.pose.y + ahead * sin_h
        half = 0.5 * v.width + 0.4
        brake_wall = [(bx - half * -sin_h, by - half * cos_h),
                      (bx + half * -sin_h, by + half * cos_h)]

    projection: List[Point] = []
    length = 0.0
    if active_trajectory is not None:
        pts, length = active_trajectory.upcoming(world.clock,
                                                 PROJECTION_HORIZON)
        projection = pts
    elif v.speed > 0.0:
        length = v.speed * PROJECTION_HORIZON
        n = max(2, int(length / 2.0) + 1)
        projection = [(v.pose.x + length * i / (n - 1) * cos_h,
                       v.pose.y + length * i / (n - 1) * sin_h)
                      for i in range(n)]

    return OverlaySet(obstacle_markers=markers, brake_wall=brake_wall,
                      trajectory_projection=projection,
                      projection_length=length)
