"""Vehicle agent: executes operator commands under the authority gate.

Single-threaded and RNG-free: the agent's entire behavior is a deterministic
function of the scenario fixture and the sequence of delivered envelopes,
which is what makes session replay bit-exact.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Tuple

from . import authority, commands, perception, planner, protocol
from .authority import (ALLOW, ALLOW_WITH_OVERRIDE, REJECT, AuthorityMachine,
                        gate_owner, gate_plan)
from .commands import Command, DialogState, advance_dialog, start_dialog
from .perception import Annotation, PerceptionState, compute_overlays
from .planner import (DEFAULT_CFG, PlanFailure, PlannerConfig, RouteFrame,
                      Trajectory, TrajectoryFollower, creep_step,
                      gap_keep_tick, plan_bypass, plan_plotted_route,
                      plan_point_and_go, plan_reroute, plan_u_turn,
                      snap_offset, stop_profile, RouteQuery)
from .world import (DT, MAX_STEER, Scenario, WorldState, clone_world,
                    collision_check, in_goal_region, physical_obstacle_views,
                    step)

# commands whose successful completion re-arms autonomous progress to the goal
RESUME_AFTER = ("BypassLeft", "BypassRight", "Reroute", "PlotAlternativeRoute",
                "PointAndGo", "UTurn")


@dataclass
class ActuationRecord:
    clock: float
    source: str            # maneuver | resume | direct | hold
    accel: float
    steer: float
    owner: str


@dataclass
class _ActiveManeuver:
    command_id: str
    kind: str
    trajectory: Trajectory
    follower: TrajectoryFollower
    start_clock: float


@dataclass
class _PendingOverride:
    command_id: str
    command: Command
    trajectory: Trajectory
    conflicts: Tuple


class ResumeController:
    """Drives the route toward the goal, braking for physical obstacles."""

    def __init__(self, frame: RouteFrame, cfg: PlannerConfig):
        self.frame = frame
        self.cfg = cfg
        self.progress = 0.0

    def tick(self, world: WorldState) -> Tuple[float, float]:
        veh = world.vehicle
        cfg = self.cfg
        ref = self.frame.ref
        s, _ = ref.project(veh.pose.position())
        s = max(s, self.progress)
        self.progress = s
        # obstacle scan ahead along the route corridor
        obstacles = physical_obstacle_views(world)
        block_d = None
        probe = 3.0
        while probe <= 25.0:
            sp = s + probe
            if sp >= ref.length:
                break
            from .world import Pose
            pose = Pose(*ref.point_at(sp), ref.heading_at(sp))
            if collision_check(pose, veh, obstacles):
                block_d = probe
                break
            probe += 1.0
        v_target = min(cfg.cruise_speed, self.frame.lane_at(s).speed_limit)
        if block_d is not None:
            v_target = min(v_target,
                           math.sqrt(max(2.0 * 2.0 * (block_d - 4.0), 0.0)))
        remaining = ref.length - s
        v_target = min(v_target, math.sqrt(max(2.0 * 2.0 * remaining, 0.0)))
        accel = (v_target - veh.speed) / 0.3
        accel = min(max(accel, -3.0), 2.0)

        ld = min(max(cfg.lookahead_gain * veh.speed + 1.0, cfg.lookahead_min),
                 cfg.lookahead_max)
        tx, ty = ref.point_at(min(s + ld, ref.length))
        dx, dy = tx - veh.pose.x, ty - veh.pose.y
        dist = math.hypot(dx, dy)
        steer = 0.0
        if dist > 1e-6:
            from .geometry import angle_diff
            alpha = angle_diff(math.atan2(dy, dx), veh.pose.heading)
            steer = math.atan2(2.0 * veh.wheelbase * math.sin(alpha), dist)
            steer = min(max(steer, -MAX_STEER), MAX_STEER)
        return accel, steer


class VehicleAgent:
    """The vehicle endpoint of the protocol."""

    def __init__(self, scenario: Scenario, outbox: protocol.LinkDirection,
                 cfg: Optional[PlannerConfig] = None):
        self.scenario = scenario
        self.world = clone_world(scenario.initial_world)
        self.route_plan = list(scenario.route_plan)
        self.cfg = cfg or DEFAULT_CFG
        self.frame = RouteFrame(self.world, self.route_plan)
        self.outbox = outbox
        self.machine = AuthorityMachine()
        self.perception = PerceptionState()
        self.stream = protocol.NotificationStream()
        self.dialogs: Dict[str, DialogState] = {}
        self.pending_override: Optional[_PendingOverride] = None
        self.active: Optional[_ActiveManeuver] = None
        self.gap_target: Optional[Tuple[str, float]] = None   # (command_id, gap)
        self.wait_until: Optional[Tuple[str, float]] = None
        self.resume: Optional[ResumeController] = None
        self.direct_control: Tuple[float, float] = (0.0, 0.0)
        self.route_alternatives: List[planner.RouteResult] = []
        self.resolved = False
        self.collisions = 0
        self.min_clearance = math.inf
        self.actuation_log: List[ActuationRecord] = []
        self._seen_seqs: set = set()
        self._session_id = "session"
        self._contextual = commands.contextual_commands(scenario.disengagement)
        # session bootstrap: assist request already accepted by the harness
        self.machine.dispatch("AssistRequestAccepted", 0.0)
        self._send_owner_change("AssistRequestAccepted")

    # -- outbound helpers ---------------------------------------------------

    def _send(self, kind: str, payload: dict):
        self.outbox.send(kind, payload, self.world.clock)

    def _send_owner_change(self, event: str):
        self._send(protocol.KIND_OWNER, protocol.owner_change_msg(
            self.machine.owner, event, self.world.clock))

    def _notify(self, level: str, text: str, related: Optional[str]):
        n = self.stream.notify(level, text, related, self.world.clock)
        self._send(protocol.KIND_NOTIFICATION, protocol.notification_msg(
            n.level, n.text, n.related_command, n.clock))

    # -- inbound ------------------------------------------------------------

    def handle(self, envelope: protocol.Envelope):
        if envelope.seq in self._seen_seqs and \
                envelope.kind not in protocol.UNRELIABLE_KINDS:
            return          # duplicate delivery: at-most-once execution
        self._seen_seqs.add(envelope.seq)
        p = envelope.payload
        if envelope.kind == protocol.KIND_COMMAND:
            self._handle_command(p)
        elif envelope.kind == protocol.KIND_DIALOG:
            self._handle_dialog_action(p)
        elif envelope.kind == protocol.KIND_DIRECT:
            self.direct_control = (float(p["accel"]), float(p["steer"]))
        elif envelope.kind == protocol.KIND_ANNOTATION:
            self._handle_annotation(p)

    def _handle_command(self, p: dict):
        cid = p["command_id"]
        if p.get("cancel"):
            self._cancel_active(cid)
            return
        if (self.pending_override is not None
                and self.pending_override.command_id == cid
                and p.get("override_confirmed")):
            po = self.pending_override
            self.pending_override = None
            self._execute_trajectory(cid, po.command, po.trajectory)
            return
        try:
            cmd = Command(p["kind"], p.get("params") or {})
        except commands.CommandError as e:
            self._notify("alert", f"Command rejected: {e}", cid)
            return
        reason = gate_owner(self.machine.owner, cmd.command_class)
        if reason is not None:
            self._notify("alert", f"Command rejected: {reason}", cid)
            return
        state = start_dialog(cmd)
        if state.done:
            if state.terminal == "confirmed":
                self._confirmed(cid, state.command,
                                override=bool(p.get("override_confirmed")))
            return
        self.dialogs[cid] = state
        prompt = commands.DIALOG_SPECS[cmd.kind].steps[state.step].prompt
        self._notify("progress_guidance", prompt, cid)

    def _handle_dialog_action(self, p: dict):
        cid = p["command_id"]
        state = self.dialogs.get(cid)
        if state is None:
            self._notify("alert", "No open dialog for this command", None)
            return
        action = p["action"]
        if state.command.kind == "Reroute" and action == "FindAlternativeRoute":
            self._compute_route_alternatives()
        try:
            new_state = advance_dialog(state, action, p.get("payload"))
        except commands.DialogActionError as e:
            self._notify("alert", f"Dialog action refused: {e}", None)
            return
        self.dialogs[cid] = new_state
        if not new_state.done:
            prompt = commands.DIALOG_SPECS[state.command.kind] \
                .steps[new_state.step].prompt
            self._notify("progress_guidance", prompt, cid)
            return
        del self.dialogs[cid]
        if new_state.terminal == "confirmed":
            self._confirmed(cid, new_state.command, override=False)

    def _handle_annotation(self, p: dict):
        if p["op"] == "classify":
            obj = perception.SceneObject(object_id=p["object_id"],
                                         selectable=True,
                                         current_class="unclassified",
                                         is_surface=p["object_id"] in
                                         {pt.id for pt in self.world.patches})
            try:
                perception.classify_object(self.perception, obj, p["new_class"])
            except perception.PerceptionError as e:
                self._notify("alert", f"Classification refused: {e}", None)
        else:
            try:
                perception.annotate(self.perception, self.world, Annotation(
                    object_id=p["object_id"], label=p.get("label", ""),
                    semantic_effect=p.get("semantic_effect", "none"),
                    author=p.get("author", "operator"),
                    clock=self.world.clock))
            except perception.PerceptionError as e:
                self._notify("alert", f"Annotation refused: {e}", None)

    # -- command execution --------------------------------------------------

    def _compute_route_alternatives(self):
        s, _ = self.frame.ref.project(self.world.vehicle.pose.position())
        from_lane = self.frame.lane_at(s)
        ls, _ = from_lane.centerline.project(self.world.vehicle.pose.position())
        blocked = set()
        for ob in physical_obstacle_views(self.world):
            for lane in self.world.road.values():
                for pt in ob.polygon:
                    os_, od = lane.centerline.project(pt)
                    if abs(od) <= 0.5 * lane.width and \
                            1e-6 < os_ < lane.centerline.length - 1e-6:
                        blocked.add(lane.id)
        blocked.discard(from_lane.id)
        query = RouteQuery(from_lane=from_lane.id, from_s=ls,
                           goal_lane=self.route_plan[-1],
                           blocked=tuple(sorted(blocked)))
        res = plan_reroute(self.world, query, original_route=self.route_plan,
                           cfg=self.cfg)
        self.route_alternatives = res if isinstance(res, list) else []

    def _plan(self, cmd: Command):
        w, cfg = self.world, self.cfg
        k = cmd.kind
        if k in ("BypassLeft", "BypassRight"):
            return plan_bypass(w, "left" if k == "BypassLeft" else "right",
                               route=self.frame, perception=self.perception,
                               cfg=cfg)
        if k == "PlotAlternativeRoute":
            return plan_plotted_route(w, cmd.params.get("points", []),
                                      route=self.frame,
                                      perception=self.perception, cfg=cfg)
        if k == "PointAndGo":
            if "point" not in cmd.params:
                return PlanFailure("missing_point")
            return plan_point_and_go(w, cmd.params["point"], route=self.frame,
                                     perception=self.perception, cfg=cfg)
        if k == "UTurn":
            return plan_u_turn(w, route=self.frame,
                               perception=self.perception, cfg=cfg)
        if k in ("SnapLeft", "SnapRight"):
            return snap_offset(w, "left" if k == "SnapLeft" else "right",
                               route=self.frame, cfg=cfg)
        if k == "ProgressSlowly":
            return creep_step(w, cmd.params["distance"],
                              perception=self.perception, cfg=cfg)
        if k == "Stop":
            return stop_profile(w, cfg)
        return None

    def _confirmed(self, cid: str, cmd: Command, override: bool):
        k = cmd.kind
        if k in ("Honk", "Microphone", "ContactParty", "Zoom", "ChangeScale",
                 "ChangePerspective"):
            self._notify("progress_status", "Progressing", cid)
            self._notify("success", f"{commands.DISPLAY_NAMES[k]} done", cid)
            return
        if k == "ToggleDriveMode":
            event = ("ToggleToDriving"
                     if self.machine.owner == authority.REMOTE_ASSISTANT
                     else "ToggleToAssistance")
            self._notify("progress_status", "Progressing", cid)
            if self.machine.dispatch(event, self.world.clock):
                self._send_owner_change(event)
                if self.machine.owner == authority.REMOTE_ASSISTANT:
                    self.direct_control = (0.0, 0.0)
                self._notify("success", f"Control owner: {self.machine.owner}",
                             cid)
            else:
                self._notify("alert", "Drive mode unchanged", cid)
            return
        if k == "Wait":
            self._clear_motion()
            self.wait_until = (cid, self.world.clock + cmd.params["duration"])
            self._notify("progress_status",
                         f"Waiting {cmd.params['duration']:.0f} s", cid)
            return
        if k == "GapKeep":
            probe = gap_keep_tick(self.world, cmd.params["gap"],
                                  route=self.frame, cfg=self.cfg)
            if isinstance(probe, PlanFailure):
                self._notify("progress_status", "Progressing", cid)
                self._notify("alert",
                             "Command rejected: no lead vehicle to follow", cid)
                return
            self._clear_motion()
            self.gap_target = (cid, cmd.params["gap"])
            self._notify("progress_status", "Progressing", cid)
            return
        if k == "Reroute":
            if not self.route_alternatives:
                self._compute_route_alternatives()
            if not self.route_alternatives:
                self._notify("progress_status", "Progressing", cid)
                self._notify("alert", "Command rejected: no alternative route",
                             cid)
                return
            idx = int(cmd.params.get("route_index", 0))
            idx = min(max(idx, 0), len(self.route_alternatives) - 1)
            chosen = self.route_alternatives[idx]
            self._notify("progress_status", "Progressing", cid)
            self._apply_route(chosen.lane_ids)
            self.route_alternatives = []
            self._notify("success", "Route updated", cid)
            self._enable_resume()
            return
        plan = self._plan(cmd)
        if plan is None:
            self._notify("progress_status", "Progressing", cid)
            self._notify("alert", "Command rejected: unsupported_command", cid)
            return
        decision = gate_plan(plan, override_confirmed=override)
        if decision.outcome == REJECT:
            # a status before the terminal alert keeps the lifecycle grammar
            self._notify("progress_status", "Progressing", cid)
            self._notify("alert",
                         f"Command rejected: {decision.reason}"
                         + (f" ({decision.detail})" if decision.detail else ""),
                         cid)
            return
        if decision.outcome == ALLOW_WITH_OVERRIDE:
            self.pending_override = _PendingOverride(
                cid, cmd, plan, decision.logical_conflicts)
            what = ", ".join(":".join(c) for c in decision.logical_conflicts)
            self._notify("progress_guidance",
                         f"Requires override confirmation: {what}", cid)
            return
        self._execute_trajectory(cid, cmd, plan)

    def _apply_route(self, lane_ids):
        self.route_plan = list(lane_ids)
        self.frame = RouteFrame(self.world, self.route_plan)
        if self.resume is not None:
            self.resume = ResumeController(self.frame, self.cfg)

    def _execute_trajectory(self, cid: str, cmd: Command, traj: Trajectory):
        self._clear_motion()
        self.active = _ActiveManeuver(
            command_id=cid, kind=cmd.kind, trajectory=traj,
            follower=TrajectoryFollower(traj, self.cfg),
            start_clock=self.world.clock)
        self._notify("progress_status", "Progressing", cid)

    def _clear_motion(self):
        self.active = None
        self.gap_target = None
        self.wait_until = None
        self.resume = None

    def _cancel_active(self, cid: str):
        if self.pending_override is not None \
                and self.pending_override.command_id == cid:
            self.pending_override = None
            return
        if cid in self.dialogs:
            del self.dialogs[cid]
            return
        if self.active is not None and self.active.command_id == cid:
            self.active = None
            self._brake_to_stop()
        if self.gap_target is not None and self.gap_target[0] == cid:
            self.gap_target = None
            self._brake_to_stop()
        if self.wait_until is not None and self.wait_until[0] == cid:
            self.wait_until = None

    def _brake_to_stop(self):
        traj = stop_profile(self.world, self.cfg)
        self.active = _ActiveManeuver(
            command_id="@stop", kind="Stop", trajectory=traj,
            follower=TrajectoryFollower(traj, self.cfg),
            start_clock=self.world.clock)

    def _enable_resume(self):
        self.resume = ResumeController(self.frame, self.cfg)

    # -- per-tick loop ------------------------------------------------------

    def _maneuver_conflict_ahead(self) -> Optional[str]:
        """Physical obstacle on the remaining path within ~2 s."""
        act = self.active
        rel = self.world.clock - act.start_clock
        for dt_ahead in (0.8, 1.6):
            t = rel + dt_ahead
            smp = None
            for s in act.trajectory.samples:
                if s.t >= t:
                    smp = s
                    break
            if smp is None:
                return None
            from .planner import _collides_timed
            hit = _collides_timed(self.world, self.world.vehicle, smp.pose,
                                  dt_ahead, self.perception)
            if hit:
                return hit
        return None

    def tick(self, dt: float = DT):
        accel, steer, source = 0.0, 0.0, "hold"
        owner = self.machine.owner

        if owner == authority.REMOTE_DRIVER:
            accel, steer = self.direct_control
            steer = min(max(steer, -MAX_STEER), MAX_STEER)
            source = "direct"
        elif self.active is not None:
            act = self.active
            hit = None
            if act.kind not in ("Stop",):
                hit = self._maneuver_conflict_ahead()
            if hit is not None:
                self._notify("alert",
                             f"Maneuver aborted: {hit} entered the path",
                             act.command_id)
                self.active = None
                self._brake_to_stop()
                act = self.active
            accel, steer = act.follower.tick(self.world)
            source = "maneuver"
            if act.follower.status == TrajectoryFollower.ABORT_DIVERGED:
                self._notify("alert", "Maneuver aborted: tracking diverged",
                             act.command_id)
                self.active = None
                self._brake_to_stop()
                accel, steer = self.active.follower.tick(self.world)
            elif act.follower.status == TrajectoryFollower.DONE:
                done = self.active
                self.active = None
                if done.command_id != "@stop":
                    self._notify("success",
                                 f"{commands.DISPLAY_NAMES.get(done.kind, done.kind)} complete",
                                 done.command_id)
                if done.kind in RESUME_AFTER:
                    self._enable_resume()
        elif self.gap_target is not None:
            cid, gap = self.gap_target
            out = gap_keep_tick(self.world, gap, route=self.frame, cfg=self.cfg)
            if isinstance(out, PlanFailure):
                self._notify("alert", "Lead vehicle lost", cid)
                self.gap_target = None
                self._brake_to_stop()
                accel, steer = self.active.follower.tick(self.world)
                source = "maneuver"
            else:
                accel = out
                # steer to hold the lane center
                rc = ResumeController(self.frame, self.cfg)
                _, steer = rc.tick(self.world)
                source = "maneuver"
        elif self.wait_until is not None:
            cid, until = self.wait_until
            accel = -3.0 if self.world.vehicle.speed > 0.0 else 0.0
            source = "maneuver"
            if self.world.clock >= until:
                self.wait_until = None
                self._notify("success", "Wait complete", cid)
        elif self.resume is not None:
            accel, steer = self.resume.tick(self.world)
            source = "resume"
        else:
            accel = -3.0 if self.world.vehicle.speed > 0.0 else 0.0

        self.actuation_log.append(ActuationRecord(
            self.world.clock, source, accel, steer, owner))
        self.world = step(self.world, (accel, steer), dt)

        # safety bookkeeping
        obstacles = physical_obstacle_views(self.world)
        if collision_check(self.world.vehicle.pose, self.world.vehicle,
                           obstacles):
            self.collisions += 1
        else:
            from .geometry import polygon_distance
            rect = self.world.vehicle.footprint()
            for ob in obstacles:
                d = polygon_distance(rect, ob.polygon)
                if d < self.min_clearance:
                    self.min_clearance = d

        # resolution check
        if (not self.resolved and self.active is None
                and self.machine.owner != authority.VEHICLE
                and in_goal_region(self.scenario, self.world)):
            self.resolved = True
            self.resume = None
            self.stream.notify("progress_status", "Scenario resolved",
                               self._session_id, self.world.clock)
            self._send(protocol.KIND_NOTIFICATION, protocol.notification_msg(
                "progress_status", "Scenario resolved", self._session_id,
                self.world.clock))
            self.machine.dispatch("ScenarioResolved", self.world.clock)
            self._send_owner_change("ScenarioResolved")
            self._notify("success", "Scenario resolved; autonomy restored",
                         self._session_id)

        self._send_telemetry()

    # -- telemetry ----------------------------------------------------------

    def _send_telemetry(self):
        w = self.world
        traj_view = None
        if self.active is not None:
            act = self.active

            class _Window:
                def upcoming(_self, clock, horizon):
                    return act.trajectory.upcoming(clock - act.start_clock,
                                                   horizon)
            traj_view = _Window()
        overlays = compute_overlays(
            w, traj_view,
            detected_ids=self.scenario.disengagement.detected_object_ids)
        digest = {
            "clock": w.clock,
            "x": w.vehicle.pose.x, "y": w.vehicle.pose.y,
            "heading": w.vehicle.pose.heading, "speed": w.vehicle.speed,
            "brake_active": w.vehicle.brake_active,
            "owner": self.machine.owner,
            "resolved": self.resolved,
            "in_goal": in_goal_region(self.scenario, w),
            "disengagement": {
                "kind": self.scenario.disengagement.kind,
                "detail": self.scenario.disengagement.detail,
                "objects": list(self.scenario.disengagement.detected_object_ids)},
            "contextual_commands": list(self._contextual),
            "dialogs": [{"command_id": cid, "kind": st.command.kind,
                         "step": st.step,
                         "prompt": commands.DIALOG_SPECS[st.command.kind]
                         .steps[st.step].prompt,
                         "params": st.command.params}
                        for cid, st in sorted(self.dialogs.items())],
            "pending_override": (
                {"command_id": self.pending_override.command_id,
                 "kind": self.pending_override.command.kind,
                 "conflicts": [list(c) for c in
                               self.pending_override.conflicts]}
                if self.pending_override else None),
            "route_alternatives": [
                {"lane_ids": r.lane_ids, "length_m": r.length_m,
                 "est_time_s": r.est_time_s,
                 "length_delta_m": r.length_delta_m,
                 "time_delta_s": r.time_delta_s}
                for r in self.route_alternatives],
            "active_command": (self.active.command_id
                               if self.active else None),
            "obstacles": [{"id": ob.id, "polygon": [list(p) for p in ob.polygon],
                           "physicality": ob.physicality}
                          for ob in w.obstacles],
            "other_vehicles": [{"id": sv.id,
                                "polygon": [list(p) for p in sv.footprint()]}
                               for sv in w.other_vehicles],
            "overlays": overlays.to_json(),
        }
        self._send(protocol.KIND_TELEMETRY, protocol.telemetry_msg(digest))

    @property
    def idle(self) -> bool:
        return (self.active is None and self.gap_target is None
                and self.wait_until is None and self.resume is None
                and not self.dialogs and self.pending_override is None)
