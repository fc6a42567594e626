"""High-level command language: taxonomy, contextual suggestion, clustering,
search, and per-command dialog state machines."""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from importlib import resources
from typing import Dict, List, Optional, Sequence, Tuple


class CommandError(Exception):
    pass


class DialogActionError(CommandError):
    """Disallowed dialog action; the caller keeps the unchanged state."""


class ConfigError(CommandError):
    pass


KINDS: Tuple[str, ...] = (
    "BypassLeft", "BypassRight", "Reroute", "PlotAlternativeRoute",
    "PointAndGo", "ProgressSlowly", "GapKeep", "UTurn", "SnapLeft",
    "SnapRight", "Stop", "Wait", "Honk", "Microphone", "ContactParty",
    "ToggleDriveMode", "Zoom", "ChangeScale", "ChangePerspective",
)

DISPLAY_NAMES: Dict[str, str] = {
    "BypassLeft": "Bypass from Left",
    "BypassRight": "Bypass from Right",
    "Reroute": "Reroute",
    "PlotAlternativeRoute": "Plot Alternative Route",
    "PointAndGo": "Point and Go",
    "ProgressSlowly": "Progress Slowly",
    "GapKeep": "Gap Keep",
    "UTurn": "U-Turn",
    "SnapLeft": "Snap to the Left",
    "SnapRight": "Snap to the Right",
    "Stop": "Stop",
    "Wait": "Wait",
    "Honk": "Honk",
    "Microphone": "Microphone",
    "ContactParty": "Contact Party",
    "ToggleDriveMode": "Toggle Drive Mode",
    "Zoom": "Zoom",
    "ChangeScale": "Change Scale",
    "ChangePerspective": "Change Perspective",
}

INJECTION = "injection_of_control"
IMMEDIATE = "immediate_action"
COMMUNICATION = "communication"
VIEW = "view_control"

COMMAND_CLASS: Dict[str, str] = {
    "BypassLeft": INJECTION, "BypassRight": INJECTION, "Reroute": INJECTION,
    "PlotAlternativeRoute": INJECTION, "PointAndGo": INJECTION,
    "ProgressSlowly": INJECTION, "GapKeep": INJECTION, "UTurn": INJECTION,
    "SnapLeft": INJECTION, "SnapRight": INJECTION, "Wait": INJECTION,
    "Stop": IMMEDIATE, "Honk": IMMEDIATE, "ToggleDriveMode": IMMEDIATE,
    "Microphone": COMMUNICATION, "ContactParty": COMMUNICATION,
    "Zoom": VIEW, "ChangeScale": VIEW, "ChangePerspective": VIEW,
}


@dataclass
class Command:
    kind: str
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in KINDS:
            raise CommandError(f"unknown command kind {self.kind!r}")
        self.params = validate_params(self.kind, self.params)

    @property
    def command_class(self) -> str:
        return COMMAND_CLASS[self.kind]


def _finite_point(p, ctx: str) -> Tuple[float, float]:
    try:
        x, y = float(p[0]), float(p[1])
    except (TypeError, ValueError, IndexError) as e:
        raise CommandError(f"{ctx}: not a point") from e
    if not (math.isfinite(x) and math.isfinite(y)):
        raise CommandError(f"{ctx}: non-finite point")
    return (x, y)


def validate_params(kind: str, params: dict) -> dict:
    params = dict(params or {})
    if kind == "GapKeep":
        gap = float(params.get("gap", 2.0))
        if not 0.5 <= gap <= 5.0:
            raise CommandError(f"GapKeep gap {gap} outside [0.5, 5] s")
        params["gap"] = gap
    elif kind == "ProgressSlowly":
        d = float(params.get("distance", 3.0))
        if not 0.0 < d <= 10.0:
            raise CommandError(f"ProgressSlowly distance {d} outside (0, 10] m")
        params["distance"] = d
    elif kind == "Wait":
        dur = float(params.get("duration", 5.0))
        if dur <= 0.0:
            raise CommandError("Wait duration must be > 0")
        params["duration"] = dur
    elif kind == "PointAndGo":
        if "point" in params:
            params["point"] = _finite_point(params["point"], "PointAndGo.point")
    elif kind == "PlotAlternativeRoute":
        pts = params.get("points", [])
        params["points"] = [_finite_point(p, f"PlotAlternativeRoute.points[{i}]")
                            for i, p in enumerate(pts)]
    return params


@dataclass
class CommandCluster:
    name: str
    members: Tuple[str, ...]


CLUSTERS: Tuple[CommandCluster, ...] = (
    CommandCluster("frequently_used",
                   ("ToggleDriveMode", "ContactParty", "Microphone", "Honk",
                    "Stop", "ChangePerspective", "Zoom", "ChangeScale")),
    CommandCluster("route_control",
                   ("Reroute", "PlotAlternativeRoute", "PointAndGo",
                    "BypassLeft", "BypassRight", "UTurn")),
    CommandCluster("movement_pace_control",
                   ("ProgressSlowly", "GapKeep", "Stop", "Wait")),
    CommandCluster("other_autonomy_modes",
                   ("ToggleDriveMode", "Wait")),
    CommandCluster("view_improvement",
                   ("Zoom", "ChangeScale", "ChangePerspective")),
    CommandCluster("lane_placement",
                   ("SnapLeft", "SnapRight")),
)


def all_commands_grouped() -> Tuple[CommandCluster, ...]:
    return CLUSTERS


def search_commands(query: str) -> List[str]:
    q = (query or "").lower()
    return [k for k in KINDS if q in DISPLAY_NAMES[k].lower()]


REASON_KINDS = ("ObstacleOnRoute", "MergeBlocked", "RoadBlockedByAuthority",
                "Unknown")

_contextual_map: Optional[Dict[str, List[str]]] = None


def load_contextual_map(path=None) -> Dict[str, List[str]]:
    if path is None:
        raw = resources.files("teleopsim.data").joinpath(
            "contextual_commands.json").read_text(encoding="utf-8")
    else:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    doc = json.loads(raw)
    for reason, kinds in doc.items():
        if reason not in REASON_KINDS:
            raise ConfigError(f"contextual map: unknown reason kind {reason!r}")
        for k in kinds:
            if k not in KINDS:
                raise ConfigError(f"contextual map[{reason}]: unknown command {k!r}")
    return {r: list(doc.get(r, [])) for r in REASON_KINDS}


def contextual_commands(reason, mapping: Optional[Dict[str, List[str]]] = None) -> List[str]:
    """Ordered command suggestions for a disengagement reason; empty for
    Unknown (the operator falls back to the all-commands view)."""
    global _contextual_map
    kind = reason if isinstance(reason, str) else reason.kind
    if kind == "Unknown":
        return []
    if mapping is None:
        if _contextual_map is None:
            _contextual_map = load_contextual_map()
        mapping = _contextual_map
    return list(mapping.get(kind, []))


# ---------------------------------------------------------------------------
# Dialogs

CONFIRMED = "@confirmed"
CANCELLED = "@cancelled"


@dataclass
class DialogStep:
    prompt: str
    # action name -> (target step or terminal, param key or None)
    actions: Dict[str, Tuple[str, Optional[str]]]


@dataclass
class DialogSpec:
    kind: str
    start: Optional[str]                  # None => zero-step, instantly confirmed
    steps: Dict[str, DialogStep] = field(default_factory=dict)


@dataclass
class DialogState:
    command: Command
    step: Optional[str]
    terminal: Optional[str] = None        # "confirmed" | "cancelled" | None

    @property
    def done(self) -> bool:
        return self.terminal is not None


def _confirm_step(prompt: str, extra: Dict[str, Tuple[str, Optional[str]]] = None,
                  name: str = "confirm") -> Dict[str, DialogStep]:
    actions: Dict[str, Tuple[str, Optional[str]]] = {
        "Confirm": (CONFIRMED, None), "Cancel": (CANCELLED, None)}
    if extra:
        actions.update(extra)
    return {name: DialogStep(prompt, actions)}


def _build_specs() -> Dict[str, DialogSpec]:
    specs: Dict[str, DialogSpec] = {}
    # zero-step: immediate actions, view controls, microphone
    for k in ("Stop", "Honk", "ToggleDriveMode", "Microphone", "Zoom",
              "ChangeScale", "ChangePerspective"):
        specs[k] = DialogSpec(k, start=None)
    for k in ("BypassLeft", "BypassRight", "SnapLeft", "SnapRight", "UTurn"):
        specs[k] = DialogSpec(k, "confirm", _confirm_step(
            f"Confirm {DISPLAY_NAMES[k]}"))
    specs["ProgressSlowly"] = DialogSpec("ProgressSlowly", "confirm", _confirm_step(
        "Set creep distance and confirm", {"SetDistance": ("confirm", "distance")}))
    specs["Wait"] = DialogSpec("Wait", "confirm", _confirm_step(
        "Set wait duration and confirm", {"SetDuration": ("confirm", "duration")}))
    specs["GapKeep"] = DialogSpec("GapKeep", "confirm", _confirm_step(
        "Set the desired time gap and confirm", {"SetGap": ("confirm", "gap")}))
    specs["ContactParty"] = DialogSpec("ContactParty", "choose_party", {
        "choose_party": DialogStep("Select the party to contact", {
            "Passenger": (CONFIRMED, "party"),
            "FleetCenter": (CONFIRMED, "party"),
            "External": (CONFIRMED, "party"),
            "Cancel": (CANCELLED, None)})})
    specs["Reroute"] = DialogSpec("Reroute", "choose_route", {
        "choose_route": DialogStep("Choose how to proceed", {
            "FindAlternativeRoute": ("confirm_route", None),
            "Cancel": (CANCELLED, None)}),
        "confirm_route": DialogStep("Confirm the selected route", {
            "SelectRoute": ("confirm_route", "route_index"),
            "Confirm": (CONFIRMED, None),
            "Cancel": (CANCELLED, None)})})
    specs["PointAndGo"] = DialogSpec("PointAndGo", "pick_point", {
        "pick_point": DialogStep("Pick a destination point on the map", {
            "PickPoint": ("confirm_point", "point"),
            "Cancel": (CANCELLED, None)}),
        "confirm_point": DialogStep("Confirm the destination point", {
            "PickPoint": ("confirm_point", "point"),
            "Confirm": (CONFIRMED, None),
            "Cancel": (CANCELLED, None)})})
    specs["PlotAlternativeRoute"] = DialogSpec("PlotAlternativeRoute", "plot0", {
        "plot0": DialogStep("Place the first tracing point", {
            "AddPoint": ("plot1", "points+"),
            "Cancel": (CANCELLED, None)}),
        "plot1": DialogStep("Place the next tracing point", {
            "AddPoint": ("plot_more", "points+"),
            "Cancel": (CANCELLED, None)}),
        "plot_more": DialogStep("Add more points or finish the route", {
            "AddPoint": ("plot_more", "points+"),
            "Done": (CONFIRMED, None),
            "Cancel": (CANCELLED, None)})})
    return specs


DIALOG_SPECS: Dict[str, DialogSpec] = _build_specs()


def start_dialog(cmd: Command) -> DialogState:
    spec = DIALOG_SPECS[cmd.kind]
    if spec.start is None:
        return DialogState(command=cmd, step=None, terminal="confirmed")
    return DialogState(command=cmd, step=spec.start)


def advance_dialog(state: DialogState, action: str, payload=None) -> DialogState:
    """Apply an action to a live dialog; raises DialogActionError when the
    action is not allowed at the current step (state is unchanged)."""
    if state.done:
        raise DialogActionError("dialog already terminal")
    spec = DIALOG_SPECS[state.command.kind]
    step = spec.steps[state.step]
    if action not in step.actions:
        raise DialogActionError(
            f"action {action!r} not allowed at step {state.step!r}")
    target, param = step.actions[action]
    params = dict(state.command.params)
    if param is not None:
        if param.endswith("+"):
            key = param[:-1]
            params.setdefault(key, [])
            params = {**params, key: list(params[key]) + [payload]}
        elif action in ("Passenger", "FleetCenter", "External"):
            params[param] = action
        else:
            if payload is None:
                raise DialogActionError(f"action {action!r} requires a payload")
            params[param] = payload
    cmd = Command(state.command.kind, params)
    if target == CONFIRMED:
        return DialogState(command=cmd, step=None, terminal="confirmed")
    if target == CANCELLED:
        return DialogState(command=state.command, step=None, terminal="cancelled")
    return DialogState(command=cmd, step=target)
