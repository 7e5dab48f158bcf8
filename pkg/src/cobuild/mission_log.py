"""Event-based mission logging and the timeline file format.

Logging is change-driven, not frequency-driven: the logger compares each
tick's canonical state against the state it last wrote and emits an event only
when something tracked actually changed.  An event is two keys — ``timestamp``
and ``action`` — and everything that happened on that tick (state deltas,
decision traces, chat) merges into the one event, so the schema stays flat
while simultaneity is preserved.

Change gates: position movement must accumulate 0.5 cells (from the last
*logged* position) to fire on its own; inventory, activity, held item, block,
completion, phase, chest, chat, traces, and the mission outcome fire on any
change.  Once an event fires it carries every field that differs from the last
logged state, including sub-gate position drift, which is what makes replay
reconstruction exact at event timestamps.

File layout (``docs/timeline-schema.md``): a root object with ``header``
(mission id, seed, the full config and its digest, roster), ``events`` (the
bare two-key array; exportable on its own), and ``footer`` (outcome).
"""

from __future__ import annotations

import json
import math
import os
from dataclasses import dataclass, field

from .config import MissionConfig, config_from_dict
from .errors import TimelineError, WorldError
from .world import WorldState, canonical_state

TIMELINE_FORMAT = "cobuild-timeline"
TIMELINE_VERSION = 1
POSITION_GATE_CELLS = 0.5

_EVENT_KEYS = {"timestamp", "action"}


@dataclass(frozen=True)
class TimelineEvent:
    timestamp: float
    action: dict

    def to_dict(self) -> dict:
        return {"timestamp": self.timestamp, "action": self.action}


@dataclass(frozen=True)
class TimelineHeader:
    mission_id: str
    seed: int
    config_digest: str
    config: dict
    roster: tuple[dict, ...]
    started_at: str | None = None  # wall-clock; omitted in deterministic runs

    def to_dict(self) -> dict:
        out = {
            "mission_id": self.mission_id,
            "seed": self.seed,
            "config_digest": self.config_digest,
            "config": self.config,
            "roster": list(self.roster),
        }
        if self.started_at is not None:
            out["started_at"] = self.started_at
        return out


@dataclass
class MissionTimeline:
    header: TimelineHeader | None
    events: list[TimelineEvent]
    footer: dict | None = None

    def mission_config(self) -> MissionConfig:
        if self.header is None:
            raise TimelineError(detail="bare timeline has no embedded config")
        return config_from_dict(self.header.config)

    def end_time(self) -> float:
        if self.footer and self.footer["outcome"].get("ended_at") is not None:
            return self.footer["outcome"]["ended_at"]
        return self.events[-1].timestamp if self.events else 0.0


# ---------------------------------------------------------------------------
# Delta extraction
# ---------------------------------------------------------------------------

_AGENT_FIELDS = ("inventory", "activity", "held_item", "looking_at")
_AGENT_TRIGGERS = {"inventory", "activity", "held_item"}


def extract_event(
    previous: dict,
    current: dict,
    traces: tuple = (),
    chats: tuple = (),
) -> dict | None:
    """Build the merged event action for everything that changed, or None.

    ``previous`` is the last *logged* canonical state; ``current`` the tick's.
    """
    triggered = bool(traces or chats)
    agents_delta: dict[str, dict] = {}
    for agent_id, now in current["agents"].items():
        before = previous["agents"].get(agent_id)
        if before is None:
            agents_delta[agent_id] = dict(now)
            triggered = True
            continue
        delta = {}
        for key in _AGENT_FIELDS:
            if now[key] != before[key]:
                delta[key] = now[key]
                if key in _AGENT_TRIGGERS:
                    triggered = True
        if now["position"] != before["position"]:
            delta["position"] = now["position"]
            moved = math.hypot(
                now["position"][0] - before["position"][0],
                now["position"][1] - before["position"][1],
            )
            if moved >= POSITION_GATE_CELLS:
                triggered = True
        if delta:
            agents_delta[agent_id] = delta

    world_delta: dict = {}
    for key in ("completion", "phase"):
        if current[key] != previous[key]:
            world_delta[key] = current[key]
            triggered = True
    if current["chest"] != previous["chest"]:
        world_delta["chest"] = current["chest"]
        triggered = True
    if current["outcome"] != previous["outcome"]:
        world_delta["outcome"] = current["outcome"]
        triggered = True
    before_blocks = {tuple(c): b for c, b in previous["blocks"]}
    changed_blocks = [
        [cell, block]
        for cell, block in current["blocks"]
        if before_blocks.get(tuple(cell)) != block
    ]
    if changed_blocks:
        world_delta["blocks"] = changed_blocks
        triggered = True

    if not triggered:
        return None

    # The agents that caused the event always carry their full position.
    for agent_id in list(agents_delta) + [t["agent_id"] for t in traces] + [
        c["from"] for c in chats
    ]:
        if agent_id in current["agents"]:
            agents_delta.setdefault(agent_id, {}).setdefault(
                "position", current["agents"][agent_id]["position"]
            )

    action: dict = {}
    if agents_delta:
        action["agents"] = agents_delta
    if world_delta:
        action["world"] = world_delta
    if traces:
        action["decision_trace"] = traces[0] if len(traces) == 1 else list(traces)
    if chats:
        action["chat"] = list(chats)
    return action


# ---------------------------------------------------------------------------
# Logger
# ---------------------------------------------------------------------------

_OPEN_LOGS: dict[str, "MissionLogger"] = {}


class MissionLogger:
    """Accumulates one mission's events; write happens at close."""

    def __init__(self, mission_id: str, world: WorldState, started_at: str | None = None):
        config = world.config
        self.mission_id = mission_id
        self.header = TimelineHeader(
            mission_id=mission_id,
            seed=config.seed,
            config_digest=config.digest(),
            config=config.to_dict(),
            roster=tuple(
                {
                    "id": agent_id,
                    "kind": agent.kind,
                    "can_place": agent.can_place,
                    "spawn": [agent.position.x, agent.position.y],
                }
                for agent_id, agent in sorted(world.agents.items())
            ),
            started_at=started_at,
        )
        self.events: list[TimelineEvent] = []
        self._last_logged = canonical_state(world)
        self._closed = False

    @property
    def closed(self) -> bool:
        return self._closed

    def record_if_changed(
        self, current: dict, traces: tuple = (), chats: tuple = ()
    ) -> TimelineEvent | None:
        """Emit at most one event for this tick's canonical state."""
        if self._closed:
            raise TimelineError("log-closed", self.mission_id)
        action = extract_event(self._last_logged, current, traces, chats)
        if action is None:
            return None
        event = TimelineEvent(timestamp=current["clock_s"], action=action)
        self.events.append(event)
        self._last_logged = current
        return event

    def close(self, outcome: dict) -> MissionTimeline:
        if self._closed:
            raise TimelineError("already-closed", self.mission_id)
        if outcome.get("status") not in ("success", "failure"):
            raise TimelineError("not-terminal", f"status={outcome.get('status')!r}")
        self._closed = True
        _OPEN_LOGS.pop(self.mission_id, None)
        return MissionTimeline(
            header=self.header,
            events=list(self.events),
            footer={"outcome": dict(outcome), "event_count": len(self.events)},
        )


def open_log(mission_id: str, world: WorldState, started_at: str | None = None) -> MissionLogger:
    """Open the mission's event log; the mission gate must have fired."""
    if not world.mission_started:
        raise WorldError("mission-not-started", mission_id)
    if mission_id in _OPEN_LOGS and not _OPEN_LOGS[mission_id].closed:
        raise TimelineError("already-open", mission_id)
    logger = MissionLogger(mission_id, world, started_at)
    _OPEN_LOGS[mission_id] = logger
    return logger


# ---------------------------------------------------------------------------
# Serialization
# ---------------------------------------------------------------------------


def _dump(obj) -> str:
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def serialize_timeline(timeline: MissionTimeline, *, bare_array: bool = False) -> str:
    """Deterministic text form; one event per line for scan-friendly files."""
    if timeline.events:
        lines = ",\n  ".join(_dump(e.to_dict()) for e in timeline.events)
        events_block = f"[\n  {lines}\n]"
    else:
        events_block = "[]"
    if bare_array:
        return events_block + "\n"
    out = [
        "{",
        f'"format":{_dump(TIMELINE_FORMAT)},',
        f'"version":{TIMELINE_VERSION},',
        f'"header":{_dump(timeline.header.to_dict() if timeline.header else None)},',
        f'"events":{events_block}' + ("," if timeline.footer is not None else ""),
    ]
    if timeline.footer is not None:
        out.append(f'"footer":{_dump(timeline.footer)}')
    out.append("}")
    return "\n".join(out) + "\n"


def write_timeline(timeline: MissionTimeline, path, *, bare_array: bool = False) -> None:
    text = serialize_timeline(timeline, bare_array=bare_array)
    tmp = f"{path}.tmp"
    try:
        with open(tmp, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except OSError as exc:
        raise TimelineError("io-failure", str(exc)) from exc


# ---------------------------------------------------------------------------
# Parsing / validation
# ---------------------------------------------------------------------------


def _validate_events(raw_events, time_limit: float | None) -> list[TimelineEvent]:
    if not isinstance(raw_events, list):
        raise TimelineError(detail="events: root element must be an array")
    events = []
    last_ts = -math.inf
    for i, raw in enumerate(raw_events):
        where = f"events[{i}]"
        if not isinstance(raw, dict):
            raise TimelineError(detail=f"{where}: event must be an object")
        keys = set(raw)
        if keys != _EVENT_KEYS:
            extra = sorted(keys - _EVENT_KEYS)
            missing = sorted(_EVENT_KEYS - keys)
            raise TimelineError(
                detail=f"{where}: events have exactly two keys "
                f"(extra={extra}, missing={missing})"
            )
        ts = raw["timestamp"]
        if not isinstance(ts, (int, float)) or isinstance(ts, bool):
            raise TimelineError(detail=f"{where}: timestamp must be a number")
        if ts < last_ts:
            raise TimelineError(
                detail=f"{where}: timestamp {ts} decreases (previous {last_ts})"
            )
        if ts < 0:
            raise TimelineError(detail=f"{where}: negative timestamp")
        if time_limit is not None and ts > time_limit:
            raise TimelineError(
                detail=f"{where}: timestamp {ts} exceeds time limit {time_limit}"
            )
        if not isinstance(raw["action"], dict):
            raise TimelineError(detail=f"{where}: action must be an object")
        last_ts = ts
        events.append(TimelineEvent(timestamp=float(ts), action=raw["action"]))
    return events


def parse_timeline_text(text: str) -> MissionTimeline:
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise TimelineError(detail=f"not valid JSON: {exc}") from exc

    if isinstance(data, list):  # bare export: just the event array
        return MissionTimeline(header=None, events=_validate_events(data, None))

    if not isinstance(data, dict):
        raise TimelineError(detail="root must be an object or an event array")
    if data.get("format") != TIMELINE_FORMAT:
        raise TimelineError(detail=f"format={data.get('format')!r}")
    if data.get("version") != TIMELINE_VERSION:
        raise TimelineError(detail=f"unsupported version {data.get('version')!r}")

    raw_header = data.get("header")
    header = None
    time_limit = None
    if raw_header is not None:
        try:
            header = TimelineHeader(
                mission_id=raw_header["mission_id"],
                seed=int(raw_header["seed"]),
                config_digest=raw_header["config_digest"],
                config=raw_header["config"],
                roster=tuple(raw_header["roster"]),
                started_at=raw_header.get("started_at"),
            )
        except (KeyError, TypeError) as exc:
            raise TimelineError(detail=f"header: {exc}") from exc
        try:
            config = config_from_dict(header.config)
        except Exception as exc:
            raise TimelineError(detail=f"header config: {exc}") from exc
        if config.digest() != header.config_digest:
            raise TimelineError(
                detail=f"header config digest mismatch: "
                f"{header.config_digest} != {config.digest()}"
            )
        time_limit = config.time_limit_s

    events = _validate_events(data.get("events"), time_limit)

    footer = data.get("footer")
    if footer is not None:
        if not isinstance(footer, dict) or "outcome" not in footer:
            raise TimelineError(detail="footer must carry the mission outcome")
        if footer["outcome"].get("status") not in ("success", "failure"):
            raise TimelineError(detail=f"footer outcome {footer['outcome']!r} not terminal")
    return MissionTimeline(header=header, events=events, footer=footer)


def parse_timeline(path) -> MissionTimeline:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise TimelineError("io-failure", str(exc)) from exc
    return parse_timeline_text(text)
