"""Control-owner state machine and the command safety gate.

Ownership moves Vehicle -> RemoteAssistant when an assist request is accepted,
may toggle to RemoteDriver and back, and returns to Vehicle when the scenario
resolves or the session aborts. The gate classifies each confirmed command as
allow / allow_with_override_confirmation / reject: logical-rule conflicts are
overridable by the operator, physical-safety conflicts never are.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Tuple

VEHICLE = "Vehicle"
REMOTE_ASSISTANT = "RemoteAssistant"
REMOTE_DRIVER = "RemoteDriver"
OWNERS = (VEHICLE, REMOTE_ASSISTANT, REMOTE_DRIVER)

EVENTS = ("AssistRequestAccepted", "ToggleToDriving", "ToggleToAssistance",
          "ScenarioResolved", "SessionAborted")

_TRANSITIONS = {
    (VEHICLE, "AssistRequestAccepted"): REMOTE_ASSISTANT,
    (REMOTE_ASSISTANT, "ToggleToDriving"): REMOTE_DRIVER,
    (REMOTE_DRIVER, "ToggleToAssistance"): REMOTE_ASSISTANT,
    (REMOTE_ASSISTANT, "ScenarioResolved"): VEHICLE,
    (REMOTE_DRIVER, "ScenarioResolved"): VEHICLE,
    (REMOTE_ASSISTANT, "SessionAborted"): VEHICLE,
    (REMOTE_DRIVER, "SessionAborted"): VEHICLE,
}


class AuthorityError(Exception):
    pass


@dataclass
class TransitionRecord:
    clock: float
    event: str
    from_owner: str
    to_owner: str
    applied: bool


@dataclass
class AuthorityMachine:
    owner: str = VEHICLE
    history: List[TransitionRecord] = field(default_factory=list)

    def dispatch(self, event: str, clock: float = 0.0) -> bool:
        """Apply an event; invalid pairs are ignored (logged, state kept)."""
        if event not in EVENTS:
            raise AuthorityError(f"unknown event {event!r}")
        nxt = _TRANSITIONS.get((self.owner, event))
        applied = nxt is not None
        self.history.append(TransitionRecord(clock, event, self.owner,
                                             nxt if applied else self.owner,
                                             applied))
        if applied:
            self.owner = nxt
        return applied


@dataclass
class GateDecision:
    outcome: str                       # allow | allow_with_override_confirmation | reject
    reason: str = "ok"
    # the logical constraints an override would waive, for the operator prompt
    logical_conflicts: Tuple[Tuple[str, ...], ...] = ()
    detail: str = ""


ALLOW = "allow"
ALLOW_WITH_OVERRIDE = "allow_with_override_confirmation"
REJECT = "reject"

R_LOGICAL = "violates_logical_constraint"
R_WRONG_OWNER = "wrong_owner"
R_PHYSICAL = "violates_physical_safety"
R_UNSUPPORTED = "unsupported_command"

_INJECTION_ONLY_FOR_ASSISTANT = True


def gate_owner(owner: str, command_class: str) -> Optional[str]:
    """Ownership check; returns a reject reason or None."""
    if owner == VEHICLE:
        return R_WRONG_OWNER
    if command_class == "injection_of_control" and owner != REMOTE_ASSISTANT:
        return R_WRONG_OWNER
    return None


def gate_plan(plan, *, override_confirmed: bool = False) -> GateDecision:
    """Classify a planner result for a command.

    `plan` is a Trajectory, a PlanFailure, or any other plan object (route
    updates, per-tick controllers) which carries no spatial conflicts.
    """
    from .planner import PlanFailure, Trajectory

    if isinstance(plan, PlanFailure):
        if plan.physical or plan.reason in ("point_not_drivable", "blocked",
                                            "no_gap"):
            return GateDecision(REJECT, R_PHYSICAL,
                                detail=f"{plan.reason}: {plan.detail}")
        return GateDecision(REJECT, R_UNSUPPORTED,
                            detail=f"{plan.reason}: {plan.detail}")
    if isinstance(plan, Trajectory) and plan.crossed_logical:
        if override_confirmed:
            return GateDecision(ALLOW, R_LOGICAL,
                                logical_conflicts=plan.crossed_logical)
        return GateDecision(ALLOW_WITH_OVERRIDE, R_LOGICAL,
                            logical_conflicts=plan.crossed_logical)
    return GateDecision(ALLOW)
