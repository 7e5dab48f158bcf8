"""Live server sessions: join gate, broadcasts, ordering, lifecycle."""

import time

import pytest
from fastapi.testclient import TestClient
from starlette.websockets import WebSocketDisconnect

from cobuild import protocol as P
from cobuild.mission_log import parse_timeline
from cobuild.server import create_server_app

from conftest import make_tiny_config


def envelope(seq, payload):
    return P.encode(P.Envelope(seq=seq, sim_time=0.0, payload=payload))


class Wire:
    """Tiny sync client over the test websocket."""

    def __init__(self, socket):
        self.socket = socket
        self.seq = 0

    def send(self, payload):
        self.seq += 1
        self.socket.send_bytes(envelope(self.seq, payload))

    def recv(self):
        return P.decode(self.socket.receive_bytes())

    def recv_until(self, kind, limit=600):
        for _ in range(limit):
            env = self.recv()
            if isinstance(env.payload, kind):
                return env
        raise AssertionError(f"no {kind.__name__} within {limit} frames")


@pytest.fixture()
def app_factory():
    def build(**overrides):
        config = make_tiny_config(**overrides)
        return create_server_app(config, realtime=True)

    return build


def test_action_before_join_is_protocol_violation(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as socket:
            wire = Wire(socket)
            wire.send(P.Action(action=P.Idle()))
            env = wire.recv()
            assert isinstance(env.payload, P.ErrorMessage)
            assert env.payload.code == "protocol-violation"


def test_join_flow_brief_and_roster(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as socket:
            wire = Wire(socket)
            wire.send(P.Join(name="alice", kind="human"))
            joined = wire.recv()
            assert isinstance(joined.payload, P.Joined)
            assert joined.payload.agent_id == "alice"
            brief = wire.recv()
            assert isinstance(brief.payload, P.MissionBrief)
            assert brief.payload.roster[0].id == "alice"
            assert brief.payload.layout.plan  # full static geometry shipped


def test_duplicate_id_rejected_existing_survives(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as first:
            w1 = Wire(first)
            w1.send(P.Join(name="alice", kind="human"))
            w1.recv()  # joined
            w1.recv()  # brief
            with client.websocket_connect("/play") as second:
                w2 = Wire(second)
                w2.send(P.Join(name="alice", kind="ai"))
                env = w2.recv()
                assert isinstance(env.payload, P.ErrorMessage)
                assert env.payload.code == "join-rejected"
            # The original connection still works: another agent can join and
            # the mission starts, which means alice's session registered.
            with client.websocket_connect("/play") as third:
                w3 = Wire(third)
                w3.send(P.Join(name="bot", kind="ai"))
                w3.recv_until(P.StateUpdate)


def test_no_broadcast_before_gate_then_streams(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as human:
            wh = Wire(human)
            wh.send(P.Join(name="alice", kind="human"))
            wh.recv(), wh.recv()
            time.sleep(0.3)  # several ticks pass without an ai joined
            with client.websocket_connect("/play") as ai:
                wa = Wire(ai)
                wa.send(P.Join(name="bot", kind="ai"))
                first = wh.recv_until(P.StateUpdate)
                # Had anything been broadcast during the wait, the first
                # update's clock would be far beyond one tick.
                assert first.payload.world.clock <= 0.25
                assert set(first.payload.agents) == {"alice", "bot"}


def test_two_clients_identical_streams_and_increasing_seq(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as a, client.websocket_connect("/play") as b:
            wa, wb = Wire(a), Wire(b)
            wa.send(P.Join(name="alice", kind="human"))
            wb.send(P.Join(name="bot", kind="ai"))
            wa.recv_until(P.StateUpdate)
            wb.recv_until(P.StateUpdate)
            wa.send(P.Action(action=P.MoveTo(target=(2, 3))))

            def stream(wire, n=6):
                frames, seqs = [], []
                while len(frames) < n:
                    env = wire.recv()
                    if isinstance(env.payload, P.StateUpdate):
                        frames.append(env.payload)
                        seqs.append(env.seq)
                return frames, seqs

            frames_a, seqs_a = stream(wa)
            frames_b, seqs_b = stream(wb)
            assert seqs_a == sorted(seqs_a)
            assert seqs_b == sorted(seqs_b)
            # Same broadcasts reach both clients (clocks align the streams).
            clocks_a = [f.world.clock for f in frames_a]
            clocks_b = [f.world.clock for f in frames_b]
            shared = sorted(set(clocks_a) & set(clocks_b))
            assert len(shared) >= 3
            by_clock_a = {f.world.clock: f for f in frames_a}
            by_clock_b = {f.world.clock: f for f in frames_b}
            for clock in shared:
                assert by_clock_a[clock] == by_clock_b[clock]


def test_rejected_action_reports_error(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as a, client.websocket_connect("/play") as b:
            wa, wb = Wire(a), Wire(b)
            wa.send(P.Join(name="alice", kind="human"))
            wb.send(P.Join(name="bot", kind="ai"))
            wa.recv_until(P.StateUpdate)
            wa.send(P.Action(action=P.Mine(target=(0, 0))))  # nothing mineable there
            env = wa.recv_until(P.ErrorMessage)
            assert env.payload.code in ("not-mineable", "out-of-reach")


def test_ai_disconnect_notifies_human_mission_continues(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as human:
            wh = Wire(human)
            wh.send(P.Join(name="alice", kind="human"))
            with client.websocket_connect("/play") as ai:
                wa = Wire(ai)
                wa.send(P.Join(name="bot", kind="ai"))
                wh.recv_until(P.StateUpdate)
                wa.send(P.Disconnect())
            env = wh.recv_until(P.ErrorMessage)
            assert env.payload.code == "agent_left"
            assert env.payload.detail == "bot"
            # Mission continues: broadcasts keep flowing afterwards.
            later = wh.recv_until(P.StateUpdate)
            assert later.payload.world.clock > 0


def test_chat_relay_both_directions(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as a, client.websocket_connect("/play") as b:
            wa, wb = Wire(a), Wire(b)
            wa.send(P.Join(name="alice", kind="human"))
            wb.send(P.Join(name="bot", kind="ai"))
            wa.recv_until(P.StateUpdate)
            wa.send(P.ChatSend(text="get wood"))
            relayed = wb.recv_until(P.ChatRelay)
            assert relayed.payload.from_ == "alice"
            assert relayed.payload.text == "get wood"
            echoed = wa.recv_until(P.ChatRelay)
            assert echoed.payload.from_ == "alice"


def test_malformed_frame_survives_connection(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as socket:
            wire = Wire(socket)
            wire.send(P.Join(name="alice", kind="human"))
            wire.recv(), wire.recv()
            socket.send_bytes(b"\x00\x00\x00\x05notjson")
            env = wire.recv()
            assert isinstance(env.payload, P.ErrorMessage)
            assert env.payload.code == "malformed-frame"
            wire.send(P.ChatSend(text="still here"))  # connection usable
            echo = wire.recv_until(P.ChatRelay)
            assert echo.payload.text == "still here"


def test_non_increasing_seq_closes_connection(app_factory):
    with TestClient(app_factory()) as client:
        with client.websocket_connect("/play") as socket:
            wire = Wire(socket)
            wire.send(P.Join(name="alice", kind="human"))
            wire.recv(), wire.recv()
            socket.send_bytes(envelope(1, P.ChatSend(text="replayed seq")))
            env = wire.recv()
            assert env.payload.code == "protocol-violation"
            with pytest.raises(WebSocketDisconnect):
                for _ in range(5):
                    wire.recv()


def test_mission_runs_to_failure_and_writes_files(tmp_path):
    config = make_tiny_config(time_limit_s=1.0)
    app = create_server_app(
        config, realtime=False, missions_dir=tmp_path, mission_id="live-test"
    )
    with TestClient(app) as client:
        with client.websocket_connect("/play") as a, client.websocket_connect("/play") as b:
            wa, wb = Wire(a), Wire(b)
            wa.send(P.Join(name="alice", kind="human"))
            wb.send(P.Join(name="bot", kind="ai"))
            end_a = wa.recv_until(P.MissionEnd, limit=200)
            end_b = wb.recv_until(P.MissionEnd, limit=200)
            assert end_a.payload.outcome.status == "failure"
            assert end_a.payload.outcome.ended_at == 1.0
            assert end_b.payload.outcome == end_a.payload.outcome
    timeline = parse_timeline(tmp_path / "live-test" / "timeline.json")
    assert timeline.footer["outcome"]["status"] == "failure"
    assert timeline.header.mission_id == "live-test"
    assert timeline.header.started_at  # wall-clock stamp in live mode
    assert (tmp_path / "live-test" / "context.md").exists()
