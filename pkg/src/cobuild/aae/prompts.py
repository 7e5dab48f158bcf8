"""Prompt assembly for review queries.

Every prompt carries, in fixed order: the mission context document verbatim,
answering instructions, the mission timeline as JSON, the full conversation
history, the viewer's current playhead, and the query.  When the serialized
timeline would blow the prompt budget, the data part keeps the events within
a window of the playhead plus every phase-change event, with an explicit
elision notice — the playhead is what the reviewer is looking at, so that
window is what questions are about.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

from ..mission_log import MissionTimeline, serialize_timeline

SECTION_CONTEXT = "== MISSION CONTEXT =="
SECTION_INSTRUCTIONS = "== ANSWERING INSTRUCTIONS =="
SECTION_TIMELINE = "== MISSION TIMELINE (JSON) =="
SECTION_HISTORY = "== CONVERSATION HISTORY =="
SECTION_PLAYHEAD = "== CURRENT PLAYHEAD =="
SECTION_QUERY = "== QUERY =="

ANSWERING_INSTRUCTIONS = (
    "Answer as the team's after-action facilitator.  Ground every claim in "
    "the mission timeline above and cite event timestamps as t=<seconds>.  "
    "When asked about the AI teammate's reasoning, use the decision traces "
    "(phase, active branch, selected node).  If the timeline does not "
    "support an answer, say that plainly."
)

# Large enough that desk-scale missions always ship the full timeline.
DEFAULT_BUDGET_CHARS = 240_000
PLAYHEAD_WINDOW_S = 60.0


@dataclass(frozen=True)
class PromptBundle:
    system: str
    data: str
    history: tuple[tuple[str, str], ...]
    playhead_line: str
    query: str

    def render(self) -> str:
        history = (
            "\n".join(f"{role}: {text}" for role, text in self.history)
            or "(no conversation yet)"
        )
        return "\n".join(
            [
                SECTION_CONTEXT,
                self.system,
                SECTION_TIMELINE,
                self.data,
                SECTION_HISTORY,
                history,
                SECTION_PLAYHEAD,
                self.playhead_line,
                SECTION_QUERY,
                self.query,
            ]
        )


def timeline_data_part(
    timeline: MissionTimeline, playhead_s: float, budget_chars: int = DEFAULT_BUDGET_CHARS
) -> str:
    full = serialize_timeline(timeline)
    if len(full) <= budget_chars:
        return full
    kept, elided = [], 0
    for event in timeline.events:
        in_window = abs(event.timestamp - playhead_s) <= PLAYHEAD_WINDOW_S
        phase_change = "phase" in event.action.get("world", {})
        if in_window or phase_change:
            kept.append(event.to_dict())
        else:
            elided += 1
    return json.dumps(
        {
            "note": (
                f"timeline truncated to +/-{PLAYHEAD_WINDOW_S:.0f}s around the "
                f"playhead plus all phase changes; {elided} events elided"
            ),
            "elided_events": elided,
            "window_s": PLAYHEAD_WINDOW_S,
            "playhead_s": playhead_s,
            "outcome": timeline.footer["outcome"] if timeline.footer else None,
            "events": kept,
        },
        sort_keys=True,
        separators=(",", ":"),
    )


def assemble_prompt(
    history: tuple[tuple[str, str], ...],
    query: str,
    playhead_s: float,
    *,
    context_text: str,
    timeline: MissionTimeline,
    budget_chars: int = DEFAULT_BUDGET_CHARS,
) -> PromptBundle:
    system = f"{context_text}\n{SECTION_INSTRUCTIONS}\n{ANSWERING_INSTRUCTIONS}"
    return PromptBundle(
        system=system,
        data=timeline_data_part(timeline, playhead_s, budget_chars),
        history=tuple(history),
        playhead_line=f"The viewer is currently at t={playhead_s:g} s.",
        query=query,
    )
