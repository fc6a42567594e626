"""Wall-clock session server: the console endpoint for `teleopsim serve`.

Runs the vehicle endpoint in real time and exposes the station side of the
link to connected clients. Two transports carry the same JSON envelopes:

  * WebSocket at /ws -- one JSON object per message (the console uses this)
  * optional raw TCP -- 4-byte big-endian length-prefixed JSON frames

Clients send station->vehicle payload kinds (command, dialog_action,
direct_control, annotation); the server pushes every delivered
vehicle->station envelope (telemetry, notification, owner_change) to all
clients. All traffic still crosses the simulated link, so the configured
delay/jitter/drop apply to a live console exactly as they do in the
headless harness.
"""
import asyncio
import json
import time
from pathlib import Path
from typing import Optional, Set

from . import protocol
from .agent import DT, VehicleAgent
from .planner import PlannerConfig
from .protocol import Envelope, Link, LinkConfig
from .world import load_scenario

STATION_KINDS = (protocol.KIND_COMMAND, protocol.KIND_DIALOG,
                 protocol.KIND_DIRECT, protocol.KIND_ANNOTATION)


class LiveSession:
    """One scenario instance driven by a wall-clock tick task."""

    def __init__(self, scenario_id: str, link_cfg: LinkConfig,
                 cfg: Optional[PlannerConfig] = None):
        self.scenario_id = scenario_id
        self.link = Link(link_cfg)
        scenario = load_scenario(scenario_id)
        self.agent = VehicleAgent(scenario, self.link.v2s, cfg)
        self.subscribers: Set[asyncio.Queue] = set()

    @property
    def clock(self) -> float:
        return self.agent.world.clock

    def subscribe(self) -> asyncio.Queue:
        q: asyncio.Queue = asyncio.Queue()
        self.subscribers.add(q)
        return q

    def unsubscribe(self, q: asyncio.Queue):
        self.subscribers.discard(q)

    def submit(self, doc: dict):
        """Accept one client JSON payload and put it on the s2v link."""
        kind = doc.get("kind")
        if kind not in STATION_KINDS:
            raise protocol.ProtocolError(f"client may not send kind {kind!r}")
        self.link.s2v.send(kind, doc["payload"], self.clock)

    async def run(self):
        """Tick the vehicle at real-time rate until cancelled."""
        next_wall = time.monotonic()
        while True:
            for env in self.link.s2v.deliver_due(self.clock):
                self.agent.handle(env)
            self.agent.tick(DT)
            for env in self.link.v2s.deliver_due(self.clock):
                doc = env.to_json()
                for q in self.subscribers:
                    q.put_nowait(doc)
            next_wall += DT
            await asyncio.sleep(max(next_wall - time.monotonic(), 0.0))


def build_app(session: LiveSession):
    from fastapi import FastAPI, WebSocket, WebSocketDisconnect
    from fastapi.responses import JSONResponse

    app = FastAPI(title="teleopsim console endpoint")

    @app.on_event("startup")
    async def _start():
        app.state.tick_task = asyncio.create_task(session.run())

    @app.on_event("shutdown")
    async def _stop():
        app.state.tick_task.cancel()

    @app.get("/session")
    async def session_info():
        return JSONResponse({
            "scenario": session.scenario_id,
            "clock": session.clock,
            "owner": session.agent.machine.owner,
            "resolved": session.agent.resolved,
        })

    @app.websocket("/ws")
    async def ws_endpoint(ws: WebSocket):
        await ws.accept()
        q = session.subscribe()

        async def pump_out():
            while True:
                await ws.send_text(json.dumps(await q.get()))

        out = asyncio.create_task(pump_out())
        try:
            while True:
                doc = json.loads(await ws.receive_text())
                session.submit(doc)
        except (WebSocketDisconnect, protocol.ProtocolError):
            pass
        finally:
            out.cancel()
            session.unsubscribe(q)

    dist = Path(__file__).resolve().parents[2] / "frontend" / "dist"
    if dist.is_dir():
        from fastapi.staticfiles import StaticFiles
        app.mount("/", StaticFiles(directory=str(dist), html=True))
    return app


async def _tcp_client(session: LiveSession, reader, writer):
    q = session.subscribe()

    async def pump_out():
        while True:
            env = Envelope.from_json(await q.get())
            writer.write(protocol.encode_frame(env))
            await writer.drain()

    out = asyncio.create_task(pump_out())
    try:
        while True:
            header = await reader.readexactly(4)
            body = await reader.readexactly(int.from_bytes(header, "big"))
            session.submit(json.loads(body.decode("utf-8")))
    except (asyncio.IncompleteReadError, ConnectionError,
            protocol.ProtocolError):
        pass
    finally:
        out.cancel()
        session.unsubscribe(q)
        writer.close()


def serve(scenario_id: str, link_cfg: LinkConfig, *, host: str = "127.0.0.1",
          port: int = 8000, tcp_port: int = 0,
          cfg: Optional[PlannerConfig] = None):
    """Run the console endpoint until interrupted (blocking)."""
    import uvicorn

    session = LiveSession(scenario_id, link_cfg, cfg)
    app = build_app(session)

    async def main():
        servers = []
        if tcp_port:
            tcp = await asyncio.start_server(
                lambda r, w: _tcp_client(session, r, w), host, tcp_port)
            servers.append(tcp)
        config = uvicorn.Config(app, host=host, port=port, log_level="info")
        await uvicorn.Server(config).serve()
        for s in servers:
            s.close()

    asyncio.run(main())
