"""Deterministic state reconstruction and scrub-bar markers from a timeline.

Reconstruction is pure event sourcing: the initial state re-derives from the
header's embedded config plus roster, and every event at or before the target
time merges its deltas in order.  At an event timestamp the reconstructed
canonical state equals the live simulation's, bit for bit once serialized.
Between events, agent display positions interpolate linearly — for rendering
only, never for state.
"""

from __future__ import annotations

import copy
from dataclasses import dataclass

from .config import Cell
from .errors import TimelineError
from .mission_log import MissionTimeline, TimelineEvent
from .world import canonical_state, dump_canonical, init_world, join_agent


@dataclass
class DisplayAgent:
    x: float
    y: float
    heading: tuple[int, int]  # unit axis of recent travel, for oriented glyphs


@dataclass
class Snapshot:
    """World state at time t plus interpolated display poses."""

    t: float
    state: dict  # canonical form (see world.canonical_state)
    display: dict[str, DisplayAgent]

    def serialized(self) -> str:
        return dump_canonical(self.state)


def _base_state(timeline: MissionTimeline) -> dict:
    config = timeline.mission_config()
    world = init_world(config)
    for entry in timeline.header.roster:
        world = join_agent(world, entry["id"], entry["kind"], entry.get("can_place"))
    state = canonical_state(world)
    for entry in timeline.header.roster:  # spawns are authoritative in the header
        state["agents"][entry["id"]]["position"] = list(entry["spawn"])
    return state


def _apply_event(state: dict, blocks: dict[Cell, dict], event: TimelineEvent) -> None:
    action = event.action
    for agent_id, delta in action.get("agents", {}).items():
        agent = state["agents"].setdefault(agent_id, {})
        for key, value in delta.items():
            agent[key] = copy.deepcopy(value)
    world_delta = action.get("world", {})
    for key in ("completion", "phase", "chest", "outcome"):
        if key in world_delta:
            state[key] = copy.deepcopy(world_delta[key])
    for cell, block in world_delta.get("blocks", []):
        blocks[tuple(cell)] = copy.deepcopy(block)


class ReplayCursor:
    """Incremental reconstruction; advancing to t2 >= t1 equals starting over."""

    def __init__(self, timeline: MissionTimeline):
        if timeline.header is None:
            raise TimelineError(detail="replay needs a timeline with a header")
        self.timeline = timeline
        self.state = _base_state(timeline)
        self.blocks: dict[Cell, dict] = {tuple(c): b for c, b in self.state["blocks"]}
        self.index = 0  # events applied so far
        self._positions: list[tuple[float, dict[str, list]]] = [
            (0.0, {a: v["position"] for a, v in self.state["agents"].items()})
        ]

    def advance_to(self, t: float) -> "ReplayCursor":
        events = self.timeline.events
        while self.index < len(events) and events[self.index].timestamp <= t:
            event = events[self.index]
            _apply_event(self.state, self.blocks, event)
            agents = event.action.get("agents", {})
            if any("position" in d for d in agents.values()):
                self._positions.append(
                    (
                        event.timestamp,
                        {a: v["position"] for a, v in self.state["agents"].items()},
                    )
                )
            self.index += 1
        return self

    def snapshot(self, t: float) -> Snapshot:
        state = copy.deepcopy(self.state)
        state["clock_s"] = t
        state["blocks"] = [
            [list(cell), copy.deepcopy(self.blocks[cell])] for cell in sorted(self.blocks)
        ]
        footer = self.timeline.footer
        if footer is not None:
            ended_at = footer["outcome"].get("ended_at")
            if ended_at is not None and t >= ended_at:
                state["outcome"] = copy.deepcopy(footer["outcome"])
        return Snapshot(t=t, state=state, display=self._display_at(t))

    def _display_at(self, t: float) -> dict[str, DisplayAgent]:
        fixes = self._positions
        after = None
        for i in range(len(fixes) - 1, -1, -1):
            if fixes[i][0] <= t:
                before = fixes[i]
                after = fixes[i + 1] if i + 1 < len(fixes) else None
                break
        else:
            before = fixes[0]
        display = {}
        for agent_id, pos in before[1].items():
            x, y = pos
            heading = (0, 1)
            if after is not None and agent_id in after[1]:
                x2, y2 = after[1][agent_id]
                span = after[0] - before[0]
                if span > 0:
                    f = min(max((t - before[0]) / span, 0.0), 1.0)
                    x, y = x + (x2 - x) * f, y + (y2 - y) * f
                dx, dy = x2 - pos[0], y2 - pos[1]
                if abs(dx) > 1e-9 or abs(dy) > 1e-9:
                    heading = (
                        (1 if dx > 0 else -1, 0)
                        if abs(dx) >= abs(dy)
                        else (0, 1 if dy > 0 else -1)
                    )
            display[agent_id] = DisplayAgent(x=x, y=y, heading=heading)
        return display


def reconstruct(timeline: MissionTimeline, t: float) -> Snapshot:
    """State at time t: header state plus all events with timestamp <= t."""
    end = timeline.end_time()
    if not 0.0 <= t <= end:
        raise TimelineError("t-out-of-range", f"t={t}, mission ends at {end}")
    return ReplayCursor(timeline).advance_to(t).snapshot(t)


# ---------------------------------------------------------------------------
# Markers
# ---------------------------------------------------------------------------

MARKER_KINDS = ("decision_point", "phase_change", "chat", "block_placed", "custom")


@dataclass(frozen=True)
class Marker:
    timestamp: float
    label: str
    kind: str


def extract_markers(timeline: MissionTimeline, kinds: set[str] | None = None) -> list[Marker]:
    """Time-ordered markers for the scrub bar, filtered to the given kinds."""
    wanted = set(kinds) if kinds is not None else set(MARKER_KINDS)
    unknown = wanted - set(MARKER_KINDS)
    if unknown:
        raise TimelineError(detail=f"unknown marker kinds: {sorted(unknown)}")
    markers: list[Marker] = []
    last_selected: dict[str, str] = {}
    last_phase = 1  # missions always open in phase 1
    for event in timeline.events:
        action = event.action
        traces = action.get("decision_trace")
        if traces is not None:
            traces = traces if isinstance(traces, list) else [traces]
            for trace in traces:
                agent, selected = trace["agent_id"], trace["selected_node"]
                if selected != last_selected.get(agent):
                    if "decision_point" in wanted:
                        markers.append(
                            Marker(event.timestamp, f"{agent}: {selected}", "decision_point")
                        )
                    last_selected[agent] = selected
        phase = action.get("world", {}).get("phase")
        if phase is not None and phase != last_phase:
            if "phase_change" in wanted:
                markers.append(
                    Marker(event.timestamp, f"phase {last_phase} -> {phase}", "phase_change")
                )
            last_phase = phase
        if "chat" in wanted:
            for chat in action.get("chat", []):
                markers.append(
                    Marker(event.timestamp, f'{chat["from"]}: {chat["text"]}', "chat")
                )
        if "block_placed" in wanted:
            for cell, block in action.get("world", {}).get("blocks", []):
                if block.get("kind") == "placed":
                    markers.append(
                        Marker(
                            event.timestamp,
                            f'{block.get("by", "?")} placed {block.get("material", "?")} '
                            f"at ({cell[0]}, {cell[1]})",
                            "block_placed",
                        )
                    )
        if "custom" in wanted:
            for custom in action.get("markers", []):
                markers.append(Marker(event.timestamp, str(custom), "custom"))
    return markers
