"""Full-duplex message protocol between the game server and its clients.

Frames are length-prefixed UTF-8 JSON: a 4-byte big-endian payload length
followed by one JSON object.  In deployment each frame travels as one
WebSocket binary message on ``/play``; the prefix makes the codec equally
usable over raw streams and recorded captures.  Every frame is an ``Envelope``
with a mandatory schema version ``v``, a per-connection strictly increasing
``seq``, the server clock ``sim_time``, and one payload variant.

The payload algebra (see ``docs/protocol.md`` for the schema):

* client -> server: ``join``, ``action``, ``chat``, ``disconnect``
* server -> client: ``joined``, ``mission_brief``, ``state_update``, ``chat``,
  ``mission_end``, ``error``

``decode(encode(m)) == m`` holds for every well-formed message; malformed
frames raise ``ProtocolError`` with a stable code.
"""

from __future__ import annotations

import json
import struct
from typing import Annotated, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from .errors import ProtocolError

PROTOCOL_VERSION = 1

Cell = tuple[int, int]


class _Model(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True, populate_by_name=True)


# ---------------------------------------------------------------------------
# Action requests
# ---------------------------------------------------------------------------


class MoveTo(_Model):
    type: Literal["move_to"] = "move_to"
    target: Cell


class Mine(_Model):
    type: Literal["mine"] = "mine"
    target: Cell


class Craft(_Model):
    type: Literal["craft"] = "craft"
    item: str = "pickaxe"


class ChestOp(_Model):
    type: Literal["chest"] = "chest"
    direction: Literal["deposit", "withdraw"]
    material: str
    n: int = Field(ge=0)


class Place(_Model):
    type: Literal["place"] = "place"
    target: Cell
    material: str


class Idle(_Model):
    type: Literal["idle"] = "idle"


ActionRequest = Annotated[
    Union[MoveTo, Mine, Craft, ChestOp, Place, Idle], Field(discriminator="type")
]


# ---------------------------------------------------------------------------
# Shared view objects
# ---------------------------------------------------------------------------


class InventoryView(_Model):
    counts: dict[str, int] = Field(default_factory=dict)
    tools: tuple[str, ...] = ()


class AgentView(_Model):
    kind: Literal["human", "ai"]
    position: tuple[float, float]
    inventory: InventoryView
    held_item: Optional[str] = None
    looking_at: Optional[Cell] = None
    behavior_state: str = "idle"
    can_place: bool = False


class BlockView(_Model):
    kind: str
    material: Optional[str] = None
    remaining: Optional[int] = None
    by: Optional[str] = None


class BlockChange(_Model):
    cell: Cell
    block: BlockView


class WorldView(_Model):
    completion: float
    clock: float
    phase: int
    chest: dict[str, int] = Field(default_factory=dict)
    block_changes: tuple[BlockChange, ...] = ()


class PlanCellView(_Model):
    cell: Cell
    material: str
    layer: int


class TowerView(_Model):
    material: str
    cells: tuple[Cell, ...]


class LayoutView(_Model):
    width: int
    height: int
    tick_rate_hz: int
    time_limit_s: float
    reach_radius: float
    move_speed_cells_s: float
    crafting_table: Cell
    chest: Cell
    pickaxe_wood_cost: int
    inventory_capacity: int = 64
    plan: tuple[PlanCellView, ...]
    towers: tuple[TowerView, ...]
    blocks: tuple[BlockChange, ...]


class RosterEntry(_Model):
    id: str
    kind: Literal["human", "ai"]
    can_place: bool


class OutcomeView(_Model):
    status: Literal["ongoing", "success", "failure"]
    ended_at: Optional[float] = None
    final_completion: Optional[float] = None


class TraceStep(_Model):
    node: str
    result: bool


class DecisionTraceView(_Model):
    agent_id: str
    sim_time: float
    phase: int = Field(ge=1, le=5)
    active_branch: tuple[TraceStep, ...]
    selected_node: str
    emitted_action: ActionRequest


# ---------------------------------------------------------------------------
# Client messages
# ---------------------------------------------------------------------------


class Join(_Model):
    type: Literal["join"] = "join"
    name: str
    kind: Literal["human", "ai"]
    can_place: Optional[bool] = None  # None = default for the kind


class Action(_Model):
    type: Literal["action"] = "action"
    action: ActionRequest
    trace: Optional[DecisionTraceView] = None


class ChatSend(_Model):
    type: Literal["chat"] = "chat"
    text: str


class Disconnect(_Model):
    type: Literal["disconnect"] = "disconnect"


ClientMessage = Annotated[
    Union[Join, Action, ChatSend, Disconnect], Field(discriminator="type")
]


# ---------------------------------------------------------------------------
# Server messages
# ---------------------------------------------------------------------------


class Joined(_Model):
    type: Literal["joined"] = "joined"
    agent_id: str
    kind: Literal["human", "ai"]


class MissionBrief(_Model):
    type: Literal["mission_brief"] = "mission_brief"
    mission_id: str
    config_digest: str
    layout: LayoutView
    roster: tuple[RosterEntry, ...]


class StateUpdate(_Model):
    type: Literal["state_update"] = "state_update"
    agents: dict[str, AgentView]
    world: WorldView


class ChatRelay(_Model):
    type: Literal["chat"] = "chat"
    from_: str = Field(alias="from")
    text: str


class MissionEnd(_Model):
    type: Literal["mission_end"] = "mission_end"
    outcome: OutcomeView


class ErrorMessage(_Model):
    type: Literal["error"] = "error"
    code: str
    detail: str = ""


ServerMessage = Annotated[
    Union[Joined, MissionBrief, StateUpdate, ChatRelay, MissionEnd, ErrorMessage],
    Field(discriminator="type"),
]


class Envelope(_Model):
    v: int = PROTOCOL_VERSION
    seq: int = Field(ge=0)
    sim_time: float = 0.0
    # "chat" exists on both sides of the union; extra="forbid" disambiguates
    # (the server variant carries "from", the client variant does not).
    payload: Union[ClientMessage, ServerMessage]


# ---------------------------------------------------------------------------
# Codec
# ---------------------------------------------------------------------------

_HEADER = struct.Struct(">I")

_CLIENT_TYPES = {"join", "action", "disconnect"}
_SERVER_TYPES = {"joined", "mission_brief", "state_update", "mission_end", "error"}
_KNOWN_TYPES = _CLIENT_TYPES | _SERVER_TYPES | {"chat"}


def encode(envelope: Envelope) -> bytes:
    body = json.dumps(
        envelope.model_dump(mode="json", by_alias=True, exclude_none=True),
        sort_keys=True,
        separators=(",", ":"),
    ).encode("utf-8")
    return _HEADER.pack(len(body)) + body


def decode(frame: bytes) -> Envelope:
    if len(frame) < _HEADER.size:
        raise ProtocolError("malformed-frame", "frame shorter than length header")
    (length,) = _HEADER.unpack_from(frame)
    body = frame[_HEADER.size :]
    if len(body) != length:
        raise ProtocolError(
            "malformed-frame", f"declared {length} bytes, got {len(body)}"
        )
    try:
        data = json.loads(body.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ProtocolError("malformed-frame", str(exc)) from exc
    if not isinstance(data, dict):
        raise ProtocolError("malformed-frame", "frame is not a JSON object")
    if data.get("v") != PROTOCOL_VERSION:
        raise ProtocolError(
            "schema-version-mismatch", f"v={data.get('v')!r}, want {PROTOCOL_VERSION}"
        )
    payload = data.get("payload")
    if isinstance(payload, dict) and payload.get("type") not in _KNOWN_TYPES:
        raise ProtocolError("unknown-variant", f"type={payload.get('type')!r}")
    try:
        return Envelope.model_validate(data)
    except ValidationError as exc:
        raise ProtocolError("malformed-frame", str(exc)) from exc


# ---------------------------------------------------------------------------
# Mission start gate
# ---------------------------------------------------------------------------


def mission_start_gate(joined) -> bool:
    """True once at least one human and one ai are present.

    Accepts an iterable of kind strings or of (id, kind) pairs.
    """
    kinds = set()
    for item in joined:
        kinds.add(item[1] if isinstance(item, tuple) else item)
    return "human" in kinds and "ai" in kinds
