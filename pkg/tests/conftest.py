"""Shared fixture builders for the test suite."""
import math

import pytest

from teleopsim.geometry import Polyline
from teleopsim.world import (LaneSegment, Obstacle, Pose, ScriptedVehicle,
                             SurfacePatch, VehicleState, WorldState)


def straight_lane(lane_id="L", y=0.0, x0=0.0, x1=200.0, width=3.6,
                  cross_left=True, cross_right=True, limit=13.9,
                  successors=()):
    return LaneSegment(
        id=lane_id, centerline=Polyline([(x0, y), (x1, y)]), width=width,
        legal_to_cross_left=cross_left, legal_to_cross_right=cross_right,
        speed_limit=limit, successors=list(successors))


def box(cx, cy, hx, hy):
    """Axis-aligned rectangle polygon around (cx, cy)."""
    return [(cx - hx, cy - hy), (cx + hx, cy - hy),
            (cx + hx, cy + hy), (cx - hx, cy + hy)]


def make_world(lanes=None, obstacles=None, *, ego=(0.0, 0.0, 0.0),
               speed=0.0, patches=None, other_vehicles=None):
    lanes = lanes if lanes is not None else [straight_lane()]
    return WorldState(
        clock=0.0,
        vehicle=VehicleState(pose=Pose(*ego), speed=speed),
        obstacles=list(obstacles or []),
        road={ln.id: ln for ln in lanes},
        patches=list(patches or []),
        other_vehicles=list(other_vehicles or []))


@pytest.fixture
def plain_world():
    """One long straight lane, empty road, ego at the origin."""
    return make_world()
