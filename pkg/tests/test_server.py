"""Console endpoint: session info, WebSocket traffic, payload gating."""
import json

import pytest

pytest.importorskip("fastapi")
from fastapi.testclient import TestClient

from teleopsim import protocol
from teleopsim.protocol import LinkConfig
from teleopsim.server import STATION_KINDS, LiveSession, build_app


@pytest.fixture()
def client():
    session = LiveSession("static_obstacle", LinkConfig())
    app = build_app(session)
    with TestClient(app) as c:
        yield c, session


def test_session_info(client):
    c, session = client
    doc = c.get("/session").json()
    assert doc["scenario"] == "static_obstacle"
    assert doc["owner"] == "RemoteAssistant"
    assert doc["resolved"] is False
    assert doc["clock"] >= 0.0


def test_ws_command_roundtrip(client):
    c, _ = client
    with c.websocket_connect("/ws") as ws:
        ws.send_text(json.dumps({
            "kind": "command",
            "payload": protocol.command_msg("c1", "Wait",
                                            {"duration": 0.5})}))
        seen = set()
        for _ in range(40):
            doc = json.loads(ws.receive_text())
            assert doc["kind"] in ("telemetry", "notification", "owner_change")
            seen.add(doc["kind"])
            if "notification" in seen and "telemetry" in seen:
                break
        assert {"telemetry", "notification"} <= seen


def test_ws_rejects_vehicle_only_kinds(client):
    c, session = client
    assert "telemetry" not in STATION_KINDS
    with pytest.raises(protocol.ProtocolError):
        session.submit({"kind": "telemetry", "payload": {}})
    before = len(session.link.s2v.sent_log)
    session.submit({"kind": "command",
                    "payload": protocol.command_msg("c2", "Honk")})
    assert len(session.link.s2v.sent_log) == before + 1


def test_link_config_applies_to_live_session():
    session = LiveSession("busy_junction", LinkConfig(one_way_delay=0.25))
    session.submit({"kind": "command",
                    "payload": protocol.command_msg("c1", "Honk")})
    assert session.link.s2v.deliver_due(0.2) == []
    out = session.link.s2v.deliver_due(0.25)
    assert [e.payload["command_id"] for e in out] == ["c1"]
