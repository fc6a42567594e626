"""Wire protocol between the operator station and the vehicle agent.

Seven payload kinds ride in seq-numbered envelopes across a latency/jitter/
drop link. Commands and other control-plane messages are reliable and
in-order; telemetry and direct-control streams are lossy (latest wins).
Also here: the assist-request queue with operator matching, and the session
notification stream with its per-command grammar.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field, asdict
from typing import Dict, List, Optional, Sequence, Set, Tuple

KIND_COMMAND = "command"
KIND_DIALOG = "dialog_action"
KIND_TELEMETRY = "telemetry"
KIND_NOTIFICATION = "notification"
KIND_OWNER = "owner_change"
KIND_DIRECT = "direct_control"
KIND_ANNOTATION = "annotation"

ENVELOPE_KINDS = (KIND_COMMAND, KIND_DIALOG, KIND_TELEMETRY, KIND_NOTIFICATION,
                  KIND_OWNER, KIND_DIRECT, KIND_ANNOTATION)

# streams whose stale messages are superseded rather than retransmitted
UNRELIABLE_KINDS = (KIND_TELEMETRY, KIND_DIRECT)


class ProtocolError(Exception):
    pass


class NotificationGrammarError(ProtocolError):
    pass


# ---------------------------------------------------------------------------
# Payloads (all JSON dicts with a "type" discriminator)

def command_msg(command_id: str, kind: str, params: Optional[dict] = None, *,
                override_confirmed: bool = False, cancel: bool = False) -> dict:
    return {"type": KIND_COMMAND, "command_id": command_id, "kind": kind,
            "params": params or {}, "override_confirmed": override_confirmed,
            "cancel": cancel}


def dialog_action_msg(command_id: str, action: str, payload=None) -> dict:
    return {"type": KIND_DIALOG, "command_id": command_id, "action": action,
            "payload": payload}


def telemetry_msg(data: dict) -> dict:
    return {"type": KIND_TELEMETRY, **data}


def notification_msg(level: str, text: str, related_command: Optional[str],
                     clock: float) -> dict:
    return {"type": KIND_NOTIFICATION, "level": level, "text": text,
            "related_command": related_command, "clock": clock}


def owner_change_msg(owner: str, event: str, clock: float) -> dict:
    return {"type": KIND_OWNER, "owner": owner, "event": event, "clock": clock}


def direct_control_msg(accel: float, steer: float) -> dict:
    return {"type": KIND_DIRECT, "accel": accel, "steer": steer}


def annotation_msg(op: str, object_id: str, *, new_class: Optional[str] = None,
                   label: str = "", semantic_effect: str = "none",
                   author: str = "operator") -> dict:
    if op not in ("classify", "annotate"):
        raise ProtocolError(f"unknown annotation op {op!r}")
    return {"type": KIND_ANNOTATION, "op": op, "object_id": object_id,
            "new_class": new_class, "label": label,
            "semantic_effect": semantic_effect, "author": author}


@dataclass
class Envelope:
    seq: int
    sent_clock: float
    kind: str
    payload: dict

    def to_json(self) -> dict:
        return {"seq": self.seq, "sent_clock": self.sent_clock,
                "kind": self.kind, "payload": self.payload}

    @classmethod
    def from_json(cls, doc: dict) -> "Envelope":
        if doc.get("kind") not in ENVELOPE_KINDS:
            raise ProtocolError(f"unknown envelope kind {doc.get('kind')!r}")
        return cls(seq=int(doc["seq"]), sent_clock=float(doc["sent_clock"]),
                   kind=doc["kind"], payload=dict(doc["payload"]))


def encode_frame(envelope: Envelope) -> bytes:
    """4-byte big-endian length prefix + UTF-8 JSON body."""
    body = json.dumps(envelope.to_json(), separators=(",", ":"),
                      sort_keys=True).encode("utf-8")
    return len(body).to_bytes(4, "big") + body


def decode_body(body: bytes) -> Envelope:
    return Envelope.from_json(json.loads(body.decode("utf-8")))


# ---------------------------------------------------------------------------
# Latency link

@dataclass
class LinkConfig:
    one_way_delay: float = 0.0
    jitter: float = 0.0
    drop_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.one_way_delay < 0.0 or self.jitter < 0.0:
            raise ProtocolError("delay and jitter must be >= 0")
        if not 0.0 <= self.drop_rate < 1.0:
            raise ProtocolError("drop_rate must be in [0, 1)")


class LinkDirection:
    """One direction of the link; owns its seq counter and RNG stream."""

    def __init__(self, name: str, cfg: LinkConfig):
        self.name = name
        self.cfg = cfg
        self._rng = random.Random(f"{cfg.seed}:{name}")
        self._next_seq = 1
        self._pending: Dict[int, Tuple[float, Envelope]] = {}
        self._dropped: Set[int] = set()
        self._next_deliver = 1
        self._extras: List[Tuple[float, Envelope]] = []
        self.sent_log: List[Envelope] = []
        self.delivered_log: List[Tuple[float, Envelope]] = []
        self.drop_count = 0
        self.retransmit_count = 0

    def send(self, kind: str, payload: dict, clock: float) -> Envelope:
        if kind not in ENVELOPE_KINDS:
            raise ProtocolError(f"unknown envelope kind {kind!r}")
        env = Envelope(seq=self._next_seq, sent_clock=clock, kind=kind,
                       payload=payload)
        self._next_seq += 1
        self.sent_log.append(env)
        cfg = self.cfg
        if kind in UNRELIABLE_KINDS:
            if self._rng.random() < cfg.drop_rate:
                self.drop_count += 1
                self._dropped.add(env.seq)
                return env
            due = clock + cfg.one_way_delay
        else:
            # reliable: each dropped attempt is retried after a 2*delay timeout
            due = clock + cfg.one_way_delay
            attempts = 0
            while self._rng.random() < cfg.drop_rate and attempts < 1000:
                attempts += 1
                self.drop_count += 1
                self.retransmit_count += 1
                due += 2.0 * cfg.one_way_delay
        if cfg.jitter > 0.0:
            due += self._rng.random() * cfg.jitter
        self._pending[env.seq] = (due, env)
        return env

    def inject_duplicate(self, envelope: Envelope, due: float):
        """Test hook: queue a copy of an already-sent envelope."""
        self._extras.append((due, envelope))

    def deliver_due(self, now: float) -> List[Envelope]:
        """Envelopes whose delivery clock has passed, in seq order."""
        out: List[Envelope] = []
        while True:
            s = self._next_deliver
            if s in self._dropped:
                self._dropped.discard(s)
                self._next_deliver += 1
                continue
            item = self._pending.get(s)
            if item is None or item[0] > now + 1e-12:
                break
            del self._pending[s]
            self._next_deliver += 1
            self.delivered_log.append((now, item[1]))
            out.append(item[1])
        still = []
        for due, env in self._extras:
            if due <= now + 1e-12:
                self.delivered_log.append((now, env))
                out.append(env)
            else:
                still.append((due, env))
        self._extras = still
        return out

    @property
    def idle(self) -> bool:
        return not self._pending and not self._extras


class Link:
    """Bidirectional station<->vehicle link with independent RNG streams."""

    def __init__(self, cfg: LinkConfig):
        self.cfg = cfg
        self.s2v = LinkDirection("s2v", cfg)
        self.v2s = LinkDirection("v2s", cfg)


# ---------------------------------------------------------------------------
# Request queue and operator matching

@dataclass
class SessionRequest:
    id: str
    vehicle_id: str
    scenario_ref: str
    urgency: int
    required_qualifications: frozenset = frozenset()
    created_clock: float = 0.0

    def __post_init__(self):
        if not 1 <= self.urgency <= 5:
            raise ProtocolError(f"urgency {self.urgency} out of range 1-5")
        self.required_qualifications = frozenset(self.required_qualifications)


@dataclass
class OperatorProfile:
    id: str
    qualifications: frozenset = frozenset()
    vigilance: float = 1.0
    available: bool = True

    def __post_init__(self):
        if not 0.0 <= self.vigilance <= 1.0:
            raise ProtocolError("vigilance must be in [0, 1]")
        self.qualifications = frozenset(self.qualifications)


class RequestQueue:
    def __init__(self):
        self._requests: List[SessionRequest] = []

    def enqueue(self, request: SessionRequest) -> int:
        if any(r.id == request.id for r in self._requests):
            raise ProtocolError(f"duplicate request id {request.id!r}")
        self._requests.append(request)
        order = sorted(self._requests,
                       key=lambda r: (-r.urgency, r.created_clock, r.id))
        return order.index(request)

    def remove(self, request_id: str):
        self._requests = [r for r in self._requests if r.id != request_id]

    def __len__(self):
        return len(self._requests)

    def items(self) -> List[SessionRequest]:
        return list(self._requests)


VIGILANCE_THRESHOLD = 0.5


def match_next(queue: RequestQueue, operators: Sequence[OperatorProfile],
               threshold: float = VIGILANCE_THRESHOLD):
    """Highest-urgency request (FIFO tie-break) paired with the most
    vigilant eligible operator; None when no pair qualifies."""
    for req in sorted(queue.items(),
                      key=lambda r: (-r.urgency, r.created_clock, r.id)):
        eligible = [op for op in operators
                    if op.available and op.vigilance >= threshold
                    and op.qualifications >= req.required_qualifications]
        if eligible:
            op = max(eligible, key=lambda o: (o.vigilance, o.id))
            return req, op
    return None


# ---------------------------------------------------------------------------
# Notifications

LEVELS = ("alert", "progress_status", "progress_guidance", "success")
LEVEL_COLORS = {"alert": "red", "progress_status": "blue",
                "progress_guidance": "yellow", "success": "green"}


@dataclass
class Notification:
    level: str
    text: str
    related_command: Optional[str]
    clock: float

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ProtocolError(f"unknown notification level {self.level!r}")


class NotificationStream:
    """Per-session ordered notification stream with grammar enforcement."""

    def __init__(self):
        self.items: List[Notification] = []

    def notify(self, level: str, text: str, related_command: Optional[str],
               clock: float) -> Notification:
        if level == "success" and related_command is not None:
            prior = [n.level for n in self.items
                     if n.related_command == related_command]
            if "progress_status" not in prior:
                raise NotificationGrammarError(
                    f"success for {related_command!r} without progress_status")
        n = Notification(level, text, related_command, clock)
        self.items.append(n)
        return n

    def for_command(self, command_id: str) -> List[Notification]:
        return [n for n in self.items if n.related_command == command_id]


def validate_notification_sequence(levels: Sequence[str],
                                   complete: bool = True) -> bool:
    """Per-command grammar: alert* progress_guidance* progress_status+
    (alert | success). With complete=False a prefix of a valid word is
    accepted (session ended mid-lifecycle)."""
    state = 0   # 0: alerts, 1: guidance, 2: statuses, 3: terminal seen
    seen_status = False
    for lv in levels:
        if lv not in LEVELS:
            return False
        if state == 3:
            return False
        if lv == "alert":
            if state == 0:
                continue
            if seen_status:
                state = 3
                continue
            return False
        if lv == "progress_guidance":
            if state <= 1:
                state = 1
                continue
            return False
        if lv == "progress_status":
            state = 2
            seen_status = True
            continue
        if lv == "success":
            if seen_status:
                state = 3
                continue
            return False
    if complete:
        return state == 3
    return True
