"""Headless session runner: scripted policies against the vehicle agent over
a simulated link, plus latency-sweep matrices and deterministic replay.

The loop is strictly lockstep and single-threaded; given (scenario, policy,
link config, seed) every run is bit-identical, which replay exploits.
"""
from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

from . import protocol, station as station_mod
from .agent import VehicleAgent
from .planner import PlannerConfig
from .protocol import (KIND_ANNOTATION, KIND_COMMAND, KIND_DIALOG,
                       Envelope, Link, LinkConfig)
from .station import DirectDrivePolicy, ScriptedStation, load_policy
from .world import DT, Scenario, load_scenario

DEFAULT_TIMEOUT = 120.0
ROUND_TRIP_KINDS = (KIND_COMMAND, KIND_DIALOG, KIND_ANNOTATION)

DIRECT_DRIVE_POLICY = "direct_drive"


@dataclass
class SessionResult:
    scenario: str
    policy: str
    resolved: bool
    session_duration: float
    commands_issued: int
    round_trips: int
    collisions: int
    min_clearance: float
    cross_track_rms: Optional[float]
    link: LinkConfig
    ticks: int

    def row(self) -> Dict[str, str]:
        def f(x):
            return format(x, ".6f")
        return {
            "scenario": self.scenario, "policy": self.policy,
            "delay": f(self.link.one_way_delay),
            "jitter": f(self.link.jitter),
            "drop_rate": f(self.link.drop_rate),
            "seed": str(self.link.seed),
            "resolved": "1" if self.resolved else "0",
            "session_duration": f(self.session_duration),
            "commands_issued": str(self.commands_issued),
            "round_trips": str(self.round_trips),
            "collisions": str(self.collisions),
            "min_clearance": f(self.min_clearance
                               if math.isfinite(self.min_clearance) else -1.0),
            "cross_track_rms": (f(self.cross_track_rms)
                                if self.cross_track_rms is not None else ""),
        }


CSV_FIELDS = ["scenario", "policy", "delay", "jitter", "drop_rate", "seed",
              "resolved", "session_duration", "commands_issued", "round_trips",
              "collisions", "min_clearance", "cross_track_rms"]


def _make_station(policy, scenario_id: str, outbox):
    if policy == DIRECT_DRIVE_POLICY:
        return DirectDrivePolicy(scenario_id, outbox), DIRECT_DRIVE_POLICY
    doc = load_policy(policy) if not isinstance(policy, dict) else policy
    return ScriptedStation(doc, outbox), doc.get("id", "custom")


def run_session(scenario, policy, link_cfg: Optional[LinkConfig] = None,
                *, timeout: float = DEFAULT_TIMEOUT,
                log_path: Optional[str] = None,
                cfg: Optional[PlannerConfig] = None) -> SessionResult:
    """Run one scripted session to resolution or timeout."""
    if isinstance(scenario, str):
        scenario = load_scenario(scenario)
    link_cfg = link_cfg or LinkConfig()
    link = Link(link_cfg)
    agent = VehicleAgent(scenario, link.v2s, cfg=cfg)
    station, policy_name = _make_station(policy, scenario.id, link.s2v)

    resolved_clock: Optional[float] = None
    ticks = 0
    states: List[dict] = []
    while True:
        clock = agent.world.clock
        for env in link.s2v.deliver_due(clock):
            agent.handle(env)
        agent.tick(DT)
        ticks += 1
        clock = agent.world.clock
        v = agent.world.vehicle
        states.append({"clock": clock, "x": v.pose.x, "y": v.pose.y,
                       "heading": v.pose.heading, "speed": v.speed})
        for env in link.v2s.deliver_due(clock):
            station.handle(env)
        station.tick(clock)
        if agent.resolved and resolved_clock is None:
            resolved_clock = clock
        if agent.resolved and v.speed <= 1e-9:
            break
        if clock >= timeout:
            break

    cross_rms = None
    if isinstance(station, DirectDrivePolicy):
        sq, n = 0.0, 0
        for rec, st in zip(agent.actuation_log, states):
            if rec.source == "direct":
                _, d = station.reference.project((st["x"], st["y"]))
                sq += d * d
                n += 1
        cross_rms = math.sqrt(sq / n) if n else 0.0

    result = SessionResult(
        scenario=scenario.id, policy=policy_name,
        resolved=agent.resolved,
        session_duration=(resolved_clock if resolved_clock is not None
                          else agent.world.clock),
        commands_issued=station.commands_issued,
        round_trips=sum(1 for e in link.s2v.sent_log
                        if e.kind in ROUND_TRIP_KINDS),
        collisions=agent.collisions,
        min_clearance=agent.min_clearance,
        cross_track_rms=cross_rms,
        link=link_cfg, ticks=ticks)

    if log_path:
        _write_log(log_path, scenario, policy_name, link_cfg, link, agent,
                   states, result)
    return result


# ---------------------------------------------------------------------------
# Session log (JSONL)

def _env_doc(env: Envelope) -> dict:
    return env.to_json()


def _write_log(path: str, scenario: Scenario, policy_name: str,
               link_cfg: LinkConfig, link: Link, agent: VehicleAgent,
               states: List[dict], result: SessionResult):
    lines: List[dict] = []
    lines.append({"type": "header", "schema_version": 1,
                  "scenario": scenario.id, "policy": policy_name, "dt": DT,
                  "link": {"one_way_delay": link_cfg.one_way_delay,
                           "jitter": link_cfg.jitter,
                           "drop_rate": link_cfg.drop_rate,
                           "seed": link_cfg.seed}})
    for direction, ld in (("s2v", link.s2v), ("v2s", link.v2s)):
        for env in ld.sent_log:
            lines.append({"type": "sent", "dir": direction,
                          "envelope": _env_doc(env)})
        for clk, env in ld.delivered_log:
            lines.append({"type": "delivered", "dir": direction,
                          "clock": clk, "envelope": _env_doc(env)})
    for tr in agent.machine.history:
        lines.append({"type": "authority", "clock": tr.clock,
                      "event": tr.event, "from": tr.from_owner,
                      "to": tr.to_owner, "applied": tr.applied})
    for rec in agent.actuation_log:
        lines.append({"type": "actuation", "clock": rec.clock,
                      "source": rec.source, "accel": rec.accel,
                      "steer": rec.steer, "owner": rec.owner})
    for st in states:
        lines.append({"type": "state", **st})
    lines.append({"type": "result", **{k: v for k, v in result.row().items()}})
    with open(path, "w", encoding="utf-8") as fh:
        for doc in lines:
            fh.write(json.dumps(doc, sort_keys=True) + "\n")


# ---------------------------------------------------------------------------
# Replay

class ReplayIntegrityError(Exception):
    pass


@dataclass
class ReplayReport:
    ok: bool
    ticks_compared: int
    mismatches: int
    partial: bool
    detail: str = ""


def replay(log_path: str) -> ReplayReport:
    """Re-run the vehicle agent from a session log's delivered envelopes and
    compare the per-tick state digests bit-exactly."""
    sent_s2v: Dict[int, dict] = {}
    delivered: List[Tuple[float, Envelope]] = []
    states: List[dict] = []
    header = None
    result_seen = False
    with open(log_path, "r", encoding="utf-8") as fh:
        for line in fh:
            line = line.strip()
            if not line:
                continue
            doc = json.loads(line)
            t = doc["type"]
            if t == "header":
                header = doc
            elif t == "sent" and doc["dir"] == "s2v":
                sent_s2v[doc["envelope"]["seq"]] = doc["envelope"]
            elif t == "delivered" and doc["dir"] == "s2v":
                delivered.append((doc["clock"],
                                  Envelope.from_json(doc["envelope"])))
            elif t == "state":
                states.append(doc)
            elif t == "result":
                result_seen = True
    if header is None:
        raise ReplayIntegrityError("log has no header record")

    # integrity: every delivered station->vehicle envelope must match a sent
    # record exactly, and (per reliable ordering) seqs must not regress
    last_reliable_seq = 0
    for clk, env in delivered:
        ref = sent_s2v.get(env.seq)
        if ref is None or Envelope.from_json(ref) != env:
            raise ReplayIntegrityError(
                f"delivered s2v envelope seq {env.seq} does not match the "
                f"sent record")
        if env.kind not in protocol.UNRELIABLE_KINDS:
            if env.seq < last_reliable_seq:
                raise ReplayIntegrityError(
                    f"reliable delivery order regressed at seq {env.seq}")
            last_reliable_seq = env.seq

    scenario = load_scenario(header["scenario"])
    sink = Link(LinkConfig())        # fresh outbox; its traffic is discarded
    agent = VehicleAgent(scenario, sink.v2s)
    pending = list(delivered)
    mismatches = 0
    compared = 0
    for expect in states:
        clock = agent.world.clock
        while pending and pending[0][0] <= clock + 1e-12:
            agent.handle(pending.pop(0)[1])
        agent.tick(DT)
        v = agent.world.vehicle
        got = {"clock": agent.world.clock, "x": v.pose.x, "y": v.pose.y,
               "heading": v.pose.heading, "speed": v.speed}
        compared += 1
        if any(got[k] != expect[k]
               for k in ("clock", "x", "y", "heading", "speed")):
            mismatches += 1
    partial = not result_seen
    return ReplayReport(ok=(mismatches == 0), ticks_compared=compared,
                        mismatches=mismatches, partial=partial,
                        detail="log truncated before the result record"
                        if partial else "")


# ---------------------------------------------------------------------------
# Matrix runs

STANDARD_MATRIX_POLICIES = {
    "static_obstacle": ["bypass_left", "reroute"],
    "police_block": ["bypass_left", "reroute"],
    "busy_junction": ["creep_junction", "point_and_go"],
}


def run_matrix(out_csv: str, *, delays: Sequence[float] = (0.0, 0.1, 0.3, 0.5),
               seed: int = 0, drop_rate: float = 0.0, jitter: float = 0.0,
               include_direct: bool = True,
               policies: Optional[Dict[str, List[str]]] = None) -> List[SessionResult]:
    """Sweep scenarios x policies x delays and write a reproducible CSV."""
    policies = policies or STANDARD_MATRIX_POLICIES
    results: List[SessionResult] = []
    for scenario_id in sorted(policies):
        pols = list(policies[scenario_id])
        if include_direct:
            pols.append(DIRECT_DRIVE_POLICY)
        for policy in pols:
            for delay in delays:
                cfg = LinkConfig(one_way_delay=delay, jitter=jitter,
                                 drop_rate=drop_rate, seed=seed)
                results.append(run_session(scenario_id, policy, cfg))
    with open(out_csv, "w", encoding="utf-8", newline="") as fh:
        fh.write(",".join(CSV_FIELDS) + "\n")
        for r in results:
            row = r.row()
            fh.write(",".join(row[k] for k in CSV_FIELDS) + "\n")
    return results
