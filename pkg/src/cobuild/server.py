"""The authoritative game server: one mission, many clients, one tick loop.

A single asyncio task owns the world.  Session handlers never touch state;
they enqueue decoded action requests stamped with an arrival sequence number,
and the tick loop applies the queue in (arrival, agent id) order — the same
ordering replay assumes.  Broadcasts go to every client each tick once the
mission gate (one human + one ai joined) has fired; none before, none after
mission end.

Message transport: each WebSocket binary message is one length-prefixed frame
from ``cobuild.protocol``.
"""

from __future__ import annotations

import asyncio
import json
import time
import uuid
from contextlib import asynccontextmanager
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path

from fastapi import FastAPI, WebSocket, WebSocketDisconnect

from . import protocol as P
from . import world as W
from .broadcast import mission_brief, state_update
from .config import MissionConfig
from .episode import build_context_doc
from .errors import ProtocolError, WorldError
from .mission_log import MissionLogger, open_log, write_timeline

DEFAULT_PORT = 8400


@dataclass
class ClientConn:
    agent_id: str
    kind: str
    socket: WebSocket
    out_seq: int = 0
    last_in_seq: int = -1


@dataclass
class QueuedAction:
    arrival: int
    agent_id: str
    action: P.ActionRequest
    trace: dict | None


class GameServer:
    def __init__(
        self,
        config: MissionConfig,
        *,
        mission_id: str | None = None,
        missions_dir=None,
        realtime: bool = True,
    ):
        config.validate()
        self.config = config
        self.mission_id = mission_id or f"live-{uuid.uuid4().hex[:8]}"
        self.missions_dir = Path(missions_dir) if missions_dir else None
        self.realtime = realtime
        self.world = W.init_world(config)
        self.clients: dict[str, ClientConn] = {}
        self.queue: list[QueuedAction] = []
        self.arrival = 0
        self.logger: MissionLogger | None = None
        self.capture: list[tuple[float, dict]] = []
        self.pending_chats: list[dict] = []
        self.finished = asyncio.Event()

    # -- outbound ----------------------------------------------------------

    async def _send(self, conn: ClientConn, payload) -> None:
        conn.out_seq += 1
        envelope = P.Envelope(seq=conn.out_seq, sim_time=self.world.clock_s, payload=payload)
        try:
            await conn.socket.send_bytes(P.encode(envelope))
        except Exception:
            pass  # the receive loop handles the disconnect

    async def _broadcast(self, payload) -> None:
        for conn in list(self.clients.values()):
            await self._send(conn, payload)

    # -- session handling ----------------------------------------------------

    async def handle_session(self, socket: WebSocket) -> None:
        await socket.accept()
        conn: ClientConn | None = None
        try:
            join_envelope = await self._expect_join(socket)
            if join_envelope is None:
                return
            join = join_envelope.payload
            if self.finished.is_set() or self.world.outcome.status != W.ONGOING:
                await self._reject(socket, "join-rejected", "mission is over")
                return
            if join.name in self.clients or join.name in self.world.agents:
                await self._reject(socket, "join-rejected", f"duplicate id {join.name!r}")
                return
            try:
                self.world = W.join_agent(self.world, join.name, join.kind, join.can_place)
            except WorldError as err:
                await self._reject(socket, "join-rejected", err.detail)
                return
            conn = ClientConn(
                agent_id=join.name,
                kind=join.kind,
                socket=socket,
                last_in_seq=join_envelope.seq,
            )
            self.clients[join.name] = conn
            await self._broadcast(P.Joined(agent_id=join.name, kind=join.kind))
            await self._send(conn, mission_brief(self.world, self.mission_id))
            await self._receive_loop(conn)
        except (WebSocketDisconnect, RuntimeError):
            pass
        finally:
            if conn is not None and self.clients.get(conn.agent_id) is conn:
                del self.clients[conn.agent_id]
                if (
                    self.world.mission_started
                    and self.world.outcome.status == W.ONGOING
                    and not self.finished.is_set()
                ):
                    await self._broadcast(
                        P.ErrorMessage(code="agent_left", detail=conn.agent_id)
                    )

    async def _expect_join(self, socket: WebSocket) -> P.Envelope | None:
        frame = await socket.receive_bytes()
        try:
            envelope = P.decode(frame)
        except ProtocolError as err:
            await self._reject(socket, err.code, err.detail)
            return None
        if not isinstance(envelope.payload, P.Join):
            await self._reject(
                socket, "protocol-violation", "first message must be join"
            )
            return None
        return envelope

    async def _reject(self, socket: WebSocket, code: str, detail: str) -> None:
        envelope = P.Envelope(
            seq=1, sim_time=self.world.clock_s, payload=P.ErrorMessage(code=code, detail=detail)
        )
        try:
            await socket.send_bytes(P.encode(envelope))
            await socket.close()
        except Exception:
            pass

    async def _receive_loop(self, conn: ClientConn) -> None:
        while True:
            frame = await conn.socket.receive_bytes()
            try:
                envelope = P.decode(frame)
            except ProtocolError as err:
                await self._send(conn, P.ErrorMessage(code=err.code, detail=err.detail))
                continue  # malformed frame; connection survives
            if envelope.seq <= conn.last_in_seq:
                await self._send(
                    conn,
                    P.ErrorMessage(
                        code="protocol-violation",
                        detail=f"seq {envelope.seq} not increasing",
                    ),
                )
                await conn.socket.close()
                return
            conn.last_in_seq = envelope.seq
            payload = envelope.payload
            if isinstance(payload, P.Action):
                self.arrival += 1
                trace = (
                    payload.trace.model_dump(mode="json", by_alias=True, exclude_none=True)
                    if payload.trace is not None
                    else None
                )
                self.queue.append(
                    QueuedAction(self.arrival, conn.agent_id, payload.action, trace)
                )
            elif isinstance(payload, P.ChatSend):
                chat = {"from": conn.agent_id, "text": payload.text}
                self.pending_chats.append(chat)
                await self._broadcast(
                    P.ChatRelay.model_validate({"from": conn.agent_id, "text": payload.text})
                )
            elif isinstance(payload, P.Join):
                await self._send(
                    conn, P.ErrorMessage(code="protocol-violation", detail="already joined")
                )
            elif isinstance(payload, P.Disconnect):
                await conn.socket.close()
                return

    # -- tick loop -----------------------------------------------------------

    async def tick_loop(self) -> None:
        dt = self.config.dt
        next_tick = time.monotonic()
        while not self.finished.is_set():
            if self.realtime:
                next_tick += dt
                delay = next_tick - time.monotonic()
                if delay > 0:
                    await asyncio.sleep(delay)
            else:
                await asyncio.sleep(0)
            if not self.world.mission_started:
                continue
            if self.logger is None:
                self._open_mission_log()
            self._tick()
            if self.world.outcome.status != W.ONGOING:
                await self._finish()
                return
            await self._broadcast(state_update(self.world))

    def _open_mission_log(self) -> None:
        started_at = datetime.now(timezone.utc).isoformat(timespec="seconds")
        self.logger = open_log(self.mission_id, self.world, started_at)

    def _tick(self) -> None:
        queued = sorted(self.queue, key=lambda q: (q.arrival, q.agent_id))
        self.queue.clear()
        # Drop requests from agents that disconnected between ticks.
        queued = [q for q in queued if q.agent_id in self.world.agents]
        traces = tuple(q.trace for q in queued if q.trace is not None)
        chats = tuple(self.pending_chats)
        self.pending_chats.clear()
        self.world = W.step_ordered(
            self.world, [(q.agent_id, q.action) for q in queued], self.config.dt
        )
        for rejection in self.world.rejections:
            conn = self.clients.get(rejection.agent_id)
            if conn is not None:
                asyncio.create_task(
                    self._send(
                        conn,
                        P.ErrorMessage(code=rejection.code, detail=rejection.detail),
                    )
                )
        if self.logger is not None:
            current = W.canonical_state(self.world)
            event = self.logger.record_if_changed(current, traces, chats)
            if event is not None:
                self.capture.append((event.timestamp, current))

    async def _finish(self) -> None:
        await self._broadcast(state_update(self.world))
        outcome = self.world.outcome
        await self._broadcast(
            P.MissionEnd(
                outcome=P.OutcomeView(
                    status=outcome.status,
                    ended_at=outcome.ended_at,
                    final_completion=outcome.final_completion,
                )
            )
        )
        if self.logger is not None and not self.logger.closed:
            timeline = self.logger.close(outcome.to_dict())
            if self.missions_dir is not None:
                mission_dir = self.missions_dir / self.mission_id
                (mission_dir / "frames").mkdir(parents=True, exist_ok=True)
                write_timeline(timeline, mission_dir / "timeline.json")
                (mission_dir / "context.md").write_text(
                    build_context_doc(self.config, "live"), encoding="utf-8"
                )
                with open(mission_dir / "capture.bin", "w", encoding="utf-8") as fh:
                    for t, state in self.capture:
                        fh.write(json.dumps({"t": t, "state": state}, sort_keys=True,
                                            separators=(",", ":")))
                        fh.write("\n")
        self.finished.set()
        for conn in list(self.clients.values()):
            try:
                await conn.socket.close()
            except Exception:
                pass


def create_server_app(
    config: MissionConfig,
    *,
    mission_id: str | None = None,
    missions_dir=None,
    realtime: bool = True,
    ui_dir=None,
) -> FastAPI:
    server = GameServer(
        config, mission_id=mission_id, missions_dir=missions_dir, realtime=realtime
    )

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        task = asyncio.create_task(server.tick_loop())
        yield
        server.finished.set()
        task.cancel()

    app = FastAPI(title="collaborative build server", lifespan=lifespan)
    app.state.game = server

    @app.websocket("/play")
    async def play(socket: WebSocket):
        await server.handle_session(socket)

    @app.get("/status")
    def status():
        world = server.world
        return {
            "mission_id": server.mission_id,
            "started": world.mission_started,
            "clock_s": world.clock_s,
            "completion": W.completion_score(world),
            "outcome": world.outcome.to_dict(),
            "agents": sorted(world.agents),
        }

    if ui_dir is not None:
        from fastapi.staticfiles import StaticFiles

        app.mount("/ui", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app
