"""Operator-station endpoint: scripted policies for the headless harness.

A scripted policy is an ordered list of (trigger, action) steps loaded from
JSON. The station observes the vehicle only through delivered envelopes
(telemetry, notifications, owner changes) and acts only by sending envelopes,
so everything it does is subject to link latency, like a human operator.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from importlib import resources
from typing import Dict, List, Optional, Tuple

from . import protocol
from .geometry import Polyline, angle_diff
from .protocol import (KIND_ANNOTATION, KIND_COMMAND, KIND_DIALOG,
                       KIND_DIRECT, KIND_NOTIFICATION, KIND_OWNER,
                       KIND_TELEMETRY, LinkDirection)


class PolicyError(Exception):
    pass


def load_policy(name_or_path) -> dict:
    """Load a policy document from the bundled set or a file path."""
    text = None
    p = str(name_or_path)
    if p.endswith(".json"):
        try:
            with open(p, "r", encoding="utf-8") as fh:
                text = fh.read()
        except OSError:
            text = None
    if text is None:
        try:
            text = resources.files("teleopsim.data.policies").joinpath(
                f"{p}.json").read_text(encoding="utf-8")
        except (FileNotFoundError, ModuleNotFoundError):
            raise PolicyError(f"unknown policy {name_or_path!r}")
    doc = json.loads(text)
    if "steps" not in doc:
        raise PolicyError("policy document missing 'steps'")
    return doc


def expand_steps(raw_steps: List[dict]) -> List[dict]:
    out: List[dict] = []
    for s in raw_steps:
        if "repeat" in s:
            for _ in range(int(s["repeat"])):
                out.extend(expand_steps(s["steps"]))
        else:
            if "trigger" not in s or "action" not in s:
                raise PolicyError(f"malformed step: {s}")
            out.append(s)
    return out


class ScriptedStation:
    """Consumes a policy script, one step at a time."""

    def __init__(self, policy: dict, outbox: LinkDirection):
        self.policy = policy
        self.steps = expand_steps(policy["steps"])
        self.outbox = outbox
        self.step_index = 0
        self.telemetry: Optional[dict] = None
        self.owner = "Vehicle"
        self.notifications: List[dict] = []
        self.last_cid: Optional[str] = None
        self.last_command: Optional[Tuple[str, dict]] = None
        self.commands_issued = 0
        self._counter = 0
        self._seen_seqs: set = set()
        self._last_telemetry_seq = -1

    # -- inbound ------------------------------------------------------------

    def handle(self, env: protocol.Envelope):
        if env.kind == KIND_TELEMETRY:
            # lossy stream: latest wins, stale out-of-order snapshots ignored
            if env.seq > self._last_telemetry_seq:
                self._last_telemetry_seq = env.seq
                self.telemetry = env.payload
            return
        if env.seq in self._seen_seqs:
            return
        self._seen_seqs.add(env.seq)
        if env.kind == KIND_NOTIFICATION:
            self.notifications.append(env.payload)
        elif env.kind == KIND_OWNER:
            self.owner = env.payload["owner"]

    # -- triggers -----------------------------------------------------------

    def _trigger(self, t: dict) -> bool:
        kind = t["type"]
        tele = self.telemetry
        if kind == "session_active":
            return self.owner != "Vehicle"
        if kind == "clock_at_least":
            return tele is not None and tele["clock"] >= float(t["t"])
        if kind == "ego_stopped":
            return tele is not None and tele["speed"] < 0.05
        if kind == "ego_in_goal":
            return tele is not None and bool(tele["in_goal"])
        if kind == "last_command_succeeded":
            return any(n["level"] == "success"
                       and n["related_command"] == self.last_cid
                       for n in self.notifications)
        if kind == "last_command_alerted":
            return any(n["level"] == "alert"
                       and n["related_command"] == self.last_cid
                       for n in self.notifications)
        if kind == "dialog_open":
            if tele is None:
                return False
            for d in tele.get("dialogs", []):
                if d["command_id"] == self.last_cid and \
                        ("step" not in t or d["step"] == t["step"]):
                    return True
            return False
        if kind == "override_requested":
            if tele is None:
                return False
            po = tele.get("pending_override")
            return po is not None and po["command_id"] == self.last_cid
        if kind == "area_clear":
            return tele is not None and not self._area_occupied(t)
        if kind == "area_occupied":
            return tele is not None and self._area_occupied(t)
        if kind == "all":
            return all(self._trigger(x) for x in t["of"])
        if kind == "any":
            return any(self._trigger(x) for x in t["of"])
        raise PolicyError(f"unknown trigger type {kind!r}")

    def _area_occupied(self, t: dict) -> bool:
        tele = self.telemetry
        cx, cy, r = float(t["x"]), float(t["y"]), float(t["radius"])
        polys = [ob["polygon"] for ob in tele.get("obstacles", [])]
        polys += [sv["polygon"] for sv in tele.get("other_vehicles", [])]
        for poly in polys:
            for px, py in poly:
                if math.hypot(px - cx, py - cy) <= r:
                    return True
        return False

    # -- actions ------------------------------------------------------------

    def _new_cid(self) -> str:
        self._counter += 1
        return f"c{self._counter}"

    def _act(self, a: dict, clock: float):
        kind = a["type"]
        if kind == "command":
            cid = self._new_cid()
            self.last_cid = cid
            self.last_command = (a["kind"], a.get("params") or {})
            self.commands_issued += 1
            self.outbox.send(KIND_COMMAND, protocol.command_msg(
                cid, a["kind"], a.get("params") or {}), clock)
        elif kind == "dialog":
            self.outbox.send(KIND_DIALOG, protocol.dialog_action_msg(
                self.last_cid, a["action"], a.get("payload")), clock)
        elif kind == "confirm_override":
            k, params = self.last_command
            self.outbox.send(KIND_COMMAND, protocol.command_msg(
                self.last_cid, k, params, override_confirmed=True), clock)
        elif kind == "cancel_active":
            self.outbox.send(KIND_COMMAND, protocol.command_msg(
                self.last_cid, self.last_command[0], cancel=True), clock)
        elif kind == "classify":
            self.outbox.send(KIND_ANNOTATION, protocol.annotation_msg(
                "classify", a["object_id"], new_class=a["new_class"]), clock)
        elif kind == "annotate":
            self.outbox.send(KIND_ANNOTATION, protocol.annotation_msg(
                "annotate", a["object_id"], label=a.get("label", ""),
                semantic_effect=a.get("semantic_effect", "none")), clock)
        elif kind == "noop":
            pass
        else:
            raise PolicyError(f"unknown action type {kind!r}")

    def tick(self, clock: float):
        if self.step_index >= len(self.steps):
            return
        step = self.steps[self.step_index]
        if self._trigger(step["trigger"]):
            self._act(step["action"], clock)
            self.step_index += 1

    @property
    def done(self) -> bool:
        return self.step_index >= len(self.steps)


class DirectDrivePolicy:
    """Tele-driving baseline: pure pursuit on station-side waypoints, acting
    on (delayed) telemetry and streaming DirectControlMsg every tick.

    The fairness point: both observations and controls cross the same link
    the assistance policies use, so latency degrades tracking honestly.
    """

    # per-scenario reference paths, with a lateral jog where an obstacle
    # occupies the original lane
    REFERENCES = {
        "static_obstacle": [(50.0, 0.0), (58.0, 0.0), (74.0, 2.6),
                            (86.0, 2.6), (102.0, 0.0), (200.0, 0.0)],
        "police_block": [(50.0, 0.0), (56.0, 0.0), (74.0, 3.2), (93.0, 3.2),
                         (109.0, 0.0), (200.0, 0.0)],
        "busy_junction": [(84.0, 0.0), (116.0, 0.0), (132.0, 1.5),
                          (150.0, 1.5), (164.0, 0.0), (200.0, 0.0)],
    }
    TARGET_SPEED = 4.5
    GAIN = 2.5
    START_CLOCK = {"busy_junction": 23.0}

    @staticmethod
    def _build_reference(knots) -> Polyline:
        # cosine-blend the lateral jogs so the reference is drivable without
        # corner-cutting; tracking error then reflects latency, not geometry
        pts = []
        for (x0, y0), (x1, y1) in zip(knots, knots[1:]):
            n = max(int(x1 - x0), 1)
            for i in range(n):
                u = i / n
                b = (1.0 - math.cos(math.pi * u)) / 2.0
                pts.append((x0 + (x1 - x0) * u, y0 + (y1 - y0) * b))
        pts.append(tuple(knots[-1]))
        return Polyline(pts)

    def __init__(self, scenario_id: str, outbox: LinkDirection):
        if scenario_id not in self.REFERENCES:
            raise PolicyError(f"no direct-drive reference for {scenario_id!r}")
        self.reference = self._build_reference(self.REFERENCES[scenario_id])
        self.start_clock = self.START_CLOCK.get(scenario_id, 0.0)
        self.outbox = outbox
        self.telemetry: Optional[dict] = None
        self.owner = "Vehicle"
        self.notifications: List[dict] = []
        self.commands_issued = 0
        self._counter = 0
        self._toggled = False
        self._seen_seqs: set = set()
        self._last_telemetry_seq = -1
        self.last_cid = None

    def handle(self, env: protocol.Envelope):
        if env.kind == KIND_TELEMETRY:
            if env.seq > self._last_telemetry_seq:
                self._last_telemetry_seq = env.seq
                self.telemetry = env.payload
            return
        if env.seq in self._seen_seqs:
            return
        self._seen_seqs.add(env.seq)
        if env.kind == KIND_NOTIFICATION:
            self.notifications.append(env.payload)
        elif env.kind == KIND_OWNER:
            self.owner = env.payload["owner"]

    def tick(self, clock: float):
        tele = self.telemetry
        if tele is None:
            return
        if self.owner == "RemoteAssistant" and not self._toggled \
                and tele["clock"] >= self.start_clock:
            self._counter += 1
            self.commands_issued += 1
            self.last_cid = f"c{self._counter}"
            self.outbox.send(KIND_COMMAND, protocol.command_msg(
                self.last_cid, "ToggleDriveMode"), clock)
            self._toggled = True
            return
        if self.owner != "RemoteDriver":
            return
        # path tracking against the last observed (stale) pose:
        # heading alignment plus lateral-error feedback on the reported pose
        x, y, h, v = tele["x"], tele["y"], tele["heading"], tele["speed"]
        ref = self.reference
        s, e = ref.project((x, y))
        steer = angle_diff(ref.heading_at(s), h) \
            - math.atan2(self.GAIN * e, 1.0 + v)
        steer = min(max(steer, -0.6), 0.6)
        if tele.get("in_goal"):
            accel = -3.0
        else:
            accel = min(max((self.TARGET_SPEED - v) / 0.5, -3.0), 2.0)
        self.outbox.send(KIND_DIRECT,
                         protocol.direct_control_msg(accel, steer), clock)

    @property
    def done(self) -> bool:
        return False
