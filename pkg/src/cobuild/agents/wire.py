"""WebSocket client loops that put agent runtimes on a live server.

Both agents follow the same shape: join, learn the layout from the mission
brief, then answer every state update with one action.  The loop ends cleanly
on ``mission_end``; any transport failure raises ``ConnectionLost`` so the CLI
exits nonzero.
"""

from __future__ import annotations

from .. import protocol as P
from ..errors import CobuildError
from ..llm import LanguageModelClient
from ..policy import DecisionTreePolicy
from .command import CommandRuntime, ContextDoc
from .dt import DtRuntime
from .observation import Layout


class ConnectionLost(CobuildError):
    default_code = "connection-lost"


class WireClient:
    def __init__(self, socket):
        self.socket = socket
        self.seq = 0
        self.sim_time = 0.0

    async def send(self, payload) -> None:
        self.seq += 1
        envelope = P.Envelope(seq=self.seq, sim_time=self.sim_time, payload=payload)
        await self.socket.send(P.encode(envelope))

    async def try_send(self, payload) -> None:
        """Send unless the server already closed; buffered inbound messages
        (typically mission_end) are still waiting to be received."""
        try:
            await self.send(payload)
        except Exception:
            pass

    async def recv(self) -> P.Envelope:
        frame = await self.socket.recv()
        envelope = P.decode(frame)
        self.sim_time = max(self.sim_time, envelope.sim_time)
        return envelope


async def _connect(server_url: str):
    import websockets

    try:
        return await websockets.connect(server_url, max_size=16 * 1024 * 1024)
    except Exception as exc:
        raise ConnectionLost(detail=f"{server_url}: {exc}") from exc


async def run_dt_agent(
    server_url: str, policy: DecisionTreePolicy, agent_id: str
) -> dict:
    """Join as the tree-driven helper; returns the mission outcome."""
    socket = await _connect(server_url)
    client = WireClient(socket)
    runtime: DtRuntime | None = None
    try:
        await client.send(P.Join(name=agent_id, kind="ai"))
        while True:
            envelope = await client.recv()
            payload = envelope.payload
            if isinstance(payload, P.MissionBrief):
                runtime = DtRuntime(agent_id, policy, Layout.from_brief(payload))
            elif isinstance(payload, P.StateUpdate) and runtime is not None:
                action, trace = runtime.on_state_update(payload)
                await client.try_send(P.Action(action=action, trace=trace))
            elif isinstance(payload, P.ErrorMessage):
                if payload.code == "join-rejected":
                    raise ConnectionLost(detail=payload.detail)
                if runtime is not None:
                    runtime.on_error(payload.code, payload.detail)
            elif isinstance(payload, P.MissionEnd):
                return payload.outcome.model_dump()
    except ConnectionLost:
        raise
    except Exception as exc:
        raise ConnectionLost(detail=str(exc)) from exc
    finally:
        try:
            await socket.close()
        except Exception:
            pass


async def run_cmd_agent(
    server_url: str,
    agent_id: str,
    *,
    context: ContextDoc | None = None,
    llm: LanguageModelClient | None = None,
    transcript_path=None,
) -> dict:
    """Join as the chat-commanded helper (full capabilities, can place)."""
    socket = await _connect(server_url)
    client = WireClient(socket)
    runtime: CommandRuntime | None = None
    try:
        await client.send(P.Join(name=agent_id, kind="ai", can_place=True))
        while True:
            envelope = await client.recv()
            payload = envelope.payload
            if isinstance(payload, P.MissionBrief):
                runtime = CommandRuntime(
                    agent_id, Layout.from_brief(payload), context=context, llm=llm
                )
            elif isinstance(payload, P.ChatRelay) and runtime is not None:
                runtime.on_chat(payload.from_, payload.text, envelope.sim_time)
            elif isinstance(payload, P.StateUpdate) and runtime is not None:
                action = runtime.on_state_update(payload)
                await client.try_send(P.Action(action=action))
                while runtime.outgoing_chat:
                    await client.try_send(P.ChatSend(text=runtime.outgoing_chat.popleft()))
            elif isinstance(payload, P.ErrorMessage):
                if payload.code == "join-rejected":
                    raise ConnectionLost(detail=payload.detail)
                if runtime is not None:
                    runtime.on_error(payload.code, payload.detail)
            elif isinstance(payload, P.MissionEnd):
                if runtime is not None and transcript_path is not None:
                    with open(transcript_path, "w", encoding="utf-8") as fh:
                        fh.write(runtime.conversation.to_json())
                return payload.outcome.model_dump()
    except ConnectionLost:
        raise
    except Exception as exc:
        raise ConnectionLost(detail=str(exc)) from exc
    finally:
        try:
            await socket.close()
        except Exception:
            pass
