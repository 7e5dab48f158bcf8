"""End-to-end over real sockets: uvicorn server, websocket agent clients."""

import asyncio
import socket
import threading
import time

import pytest
import uvicorn

from cobuild import protocol as P
from cobuild.agents.observation import Layout
from cobuild.agents.scripted import ScriptedHumanRuntime
from cobuild.agents.wire import ConnectionLost, WireClient, run_dt_agent
from cobuild.config import FloorPlan, PlanLayer, Tower
from cobuild.mission_log import parse_timeline
from cobuild.policy import default_policy
from cobuild.server import create_server_app

from conftest import make_tiny_config


def micro_config():
    """A mission a live pair can finish in a few wall-clock seconds."""
    return make_tiny_config(
        plan=FloorPlan(layers=(PlanLayer("wood", ((5, 5), (6, 5))),)),
        towers=(Tower("wood", ((1, 5),), 10),),
        mine_durations_s={"wood": 0.1},
        pickaxe_wood_cost=1,
        move_speed_cells_s=5.0,
        time_limit_s=12.0,
    )


class ServerThread:
    def __init__(self, app):
        self.server = uvicorn.Server(
            uvicorn.Config(app, host="127.0.0.1", port=0, log_level="error")
        )
        self.thread = threading.Thread(target=self.server.run, daemon=True)

    def __enter__(self):
        self.thread.start()
        deadline = time.monotonic() + 10
        while not self.server.started:
            if time.monotonic() > deadline:
                raise RuntimeError("server did not start")
            time.sleep(0.01)
        port = self.server.servers[0].sockets[0].getsockname()[1]
        return f"ws://127.0.0.1:{port}/play"

    def __exit__(self, *exc):
        self.server.should_exit = True
        self.thread.join(timeout=10)


async def run_wire_human(url: str, agent_id: str) -> dict:
    """The scripted builder speaking the real protocol."""
    import websockets

    async with websockets.connect(url) as socket_:
        client = WireClient(socket_)
        await client.send(P.Join(name=agent_id, kind="human"))
        runtime = None
        while True:
            envelope = await client.recv()
            payload = envelope.payload
            if isinstance(payload, P.MissionBrief):
                runtime = ScriptedHumanRuntime(agent_id, Layout.from_brief(payload))
            elif isinstance(payload, P.StateUpdate) and runtime is not None:
                await client.try_send(P.Action(action=runtime.on_state_update(payload)))
            elif isinstance(payload, P.ErrorMessage) and runtime is not None:
                runtime.on_error(payload.code, payload.detail)
            elif isinstance(payload, P.MissionEnd):
                return payload.outcome.model_dump()


def test_full_mission_over_real_sockets(tmp_path):
    config = micro_config()
    app = create_server_app(
        config, realtime=True, missions_dir=tmp_path, mission_id="wire-e2e"
    )

    async def both(url):
        return await asyncio.gather(
            run_wire_human(url, "alice"),
            run_dt_agent(url, default_policy(), "helper"),
        )

    with ServerThread(app) as url:
        human_outcome, dt_outcome = asyncio.run(both(url))

    assert human_outcome == dt_outcome
    assert human_outcome["status"] == "success"
    timeline = parse_timeline(tmp_path / "wire-e2e" / "timeline.json")
    assert timeline.footer["outcome"]["status"] == "success"
    # Wire traces made it into the log.
    assert any("decision_trace" in e.action for e in timeline.events)


def test_server_absent_is_connection_lost():
    with socket.socket() as probe:
        probe.bind(("127.0.0.1", 0))
        dead_port = probe.getsockname()[1]
    with pytest.raises(ConnectionLost):
        asyncio.run(
            run_dt_agent(f"ws://127.0.0.1:{dead_port}/play", default_policy(), "x")
        )
