"""Headless scripted episodes: the single-episode primitive of study runs.

One deterministic single-threaded loop drives the scripted builder and the
chosen AI through the same broadcast payloads a live server would send,
logging events and capturing the canonical state at every event timestamp.
The capture is the replay oracle: reconstruction must reproduce it exactly.

Outputs land under ``<out_dir>/<mission_id>/``: ``timeline.json``,
``capture.bin`` (one ``{"t": ..., "state": ...}`` JSON line per event),
``context.md`` (the review briefing), and for command-agent runs
``conversation.json``.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path

from . import protocol as P
from . import world as W
from .broadcast import state_update
from .agents.command import CommandRuntime, ContextDoc
from .agents.dt import DtRuntime
from .agents.observation import Layout
from .agents.scripted import ScriptedHumanRuntime
from .config import MissionConfig
from .errors import ConfigError
from .llm import LanguageModelClient
from .mission_log import MissionLogger, MissionTimeline, open_log, write_timeline
from .policy import DecisionTreePolicy, default_policy

HUMAN_ID = "builder"
AI_ID = "helper"

AI_KINDS = ("dt", "cmd", "none")


@dataclass
class EpisodeResult:
    mission_id: str
    outcome: dict
    timeline: MissionTimeline
    capture: list[tuple[float, dict]]  # (timestamp, canonical state) per event
    mission_dir: Path | None = None
    timeline_path: Path | None = None
    capture_path: Path | None = None
    context_path: Path | None = None
    conversation_path: Path | None = None
    trace_count: int = 0


@dataclass
class ChatScript:
    """Commands the scripted human speaks at given mission times."""

    lines: list[tuple[float, str]] = field(default_factory=list)


def default_mission_id(config: MissionConfig, ai: str) -> str:
    return f"{ai}-s{config.seed:03d}-{config.digest()[7:15]}"


def run_episode(
    config: MissionConfig,
    *,
    ai: str = "dt",
    policy: DecisionTreePolicy | None = None,
    llm: LanguageModelClient | None = None,
    context: ContextDoc | None = None,
    chat_script: ChatScript | None = None,
    out_dir=None,
    mission_id: str | None = None,
) -> EpisodeResult:
    """Run one mission to termination; faster than real time."""
    if ai not in AI_KINDS:
        raise ConfigError(detail=f"ai must be one of {AI_KINDS}, got {ai!r}")
    config.validate()
    mission_id = mission_id or default_mission_id(config, ai)

    world = W.init_world(config)
    world = W.join_agent(world, HUMAN_ID, W.HUMAN)
    # The LLM-commanded agent keeps full capabilities, the tree agent must not
    # place, and the ablation stub only satisfies the start gate.
    world = W.join_agent(world, AI_ID, W.AI, can_place=(ai == "cmd"))

    layout = Layout.from_config(config)
    human = ScriptedHumanRuntime(HUMAN_ID, layout)
    helper: DtRuntime | CommandRuntime | None
    if ai == "dt":
        helper = DtRuntime(AI_ID, policy or default_policy(), layout)
    elif ai == "cmd":
        helper = CommandRuntime(AI_ID, layout, context=context, llm=llm)
    else:
        helper = None

    logger: MissionLogger = open_log(mission_id, world)
    capture: list[tuple[float, dict]] = []
    script = list(chat_script.lines) if chat_script else []
    script.sort()
    trace_count = 0

    max_ticks = int(config.time_limit_s * config.tick_rate_hz) + 2
    for _ in range(max_ticks):
        update = state_update(world)
        chats: list[dict] = []
        while script and script[0][0] <= world.clock_s:
            _, text = script.pop(0)
            chats.append({"from": HUMAN_ID, "text": text})
            if isinstance(helper, CommandRuntime):
                helper.on_chat(HUMAN_ID, text, world.clock_s)

        actions = {HUMAN_ID: human.on_state_update(update)}
        traces: list[dict] = []
        if isinstance(helper, DtRuntime):
            action, trace = helper.on_state_update(update)
            actions[AI_ID] = action
            if trace is not None:
                traces.append(
                    trace.model_dump(mode="json", by_alias=True, exclude_none=True)
                )
                trace_count += 1
        elif isinstance(helper, CommandRuntime):
            actions[AI_ID] = helper.on_state_update(update)
            while helper.outgoing_chat:
                chats.append({"from": AI_ID, "text": helper.outgoing_chat.popleft()})
        else:
            actions[AI_ID] = P.Idle()  # ablation stub satisfies the gate, nothing more

        world = W.step(world, actions, config.dt)
        for rejection in world.rejections:
            runtime = human if rejection.agent_id == HUMAN_ID else helper
            if runtime is not None:
                runtime.on_error(rejection.code, rejection.detail)

        current = W.canonical_state(world)
        event = logger.record_if_changed(current, tuple(traces), tuple(chats))
        if event is not None:
            capture.append((event.timestamp, current))
        if world.outcome.status != W.ONGOING:
            break

    timeline = logger.close(world.outcome.to_dict())
    result = EpisodeResult(
        mission_id=mission_id,
        outcome=world.outcome.to_dict(),
        timeline=timeline,
        capture=capture,
        trace_count=trace_count,
    )
    if out_dir is not None:
        result.mission_dir = _write_outputs(result, config, ai, helper, Path(out_dir))
    return result


def _write_outputs(result, config, ai, helper, out_dir: Path) -> Path:
    mission_dir = out_dir / result.mission_id
    (mission_dir / "frames").mkdir(parents=True, exist_ok=True)
    result.timeline_path = mission_dir / "timeline.json"
    write_timeline(result.timeline, result.timeline_path)
    result.capture_path = mission_dir / "capture.bin"
    with open(result.capture_path, "w", encoding="utf-8") as fh:
        for t, state in result.capture:
            fh.write(
                json.dumps({"t": t, "state": state}, sort_keys=True, separators=(",", ":"))
            )
            fh.write("\n")
    result.context_path = mission_dir / "context.md"
    result.context_path.write_text(build_context_doc(config, ai), encoding="utf-8")
    if isinstance(helper, CommandRuntime):
        result.conversation_path = mission_dir / "conversation.json"
        result.conversation_path.write_text(
            helper.conversation.to_json(), encoding="utf-8"
        )
    return mission_dir


def load_capture(path) -> list[tuple[float, dict]]:
    capture = []
    with open(path, "r", encoding="utf-8") as fh:
        for line in fh:
            if line.strip():
                record = json.loads(line)
                capture.append((record["t"], record["state"]))
    return capture


# ---------------------------------------------------------------------------
# Mission context document
# ---------------------------------------------------------------------------

AI_DESCRIPTIONS = {
    "dt": (
        "The helper runs a five-phase decision-tree policy keyed to house "
        "completion thresholds.  It infers the builder's activity from "
        "position and observable state, gathers materials that complement "
        "what the builder is working on, crafts its own pickaxe, and hands "
        "resources over through the chest.  It cannot place blocks; only the "
        "human builder can.  Each of its decisions is traced in the timeline "
        "(phase, branch predicates, selected node)."
    ),
    "cmd": (
        "The helper follows natural-language chat commands, translating them "
        "into calls from a fixed skill library (go_to, mine, craft, "
        "chest_deposit, chest_withdraw, place, say).  It has the same "
        "capabilities as the human, including placing blocks.  Conversation "
        "history is saved with timestamps."
    ),
    "none": "No active helper: the AI slot joined but idled for the whole mission.",
    "live": (
        "Helper agents connected over the wire for this mission; when they "
        "reported decision traces, those appear in the timeline events."
    ),
}


def build_context_doc(config: MissionConfig, ai: str) -> str:
    counts = config.plan.material_counts()
    layers = ", ".join(
        f"{layer.material} ({len(layer.cells)} cells)" for layer in config.plan.layers
    )
    return f"""# Mission context

## Purpose
A human builder and an AI helper construct a house together on a marked floor
plan before the {config.time_limit_s:.0f} second time limit.  The mission
succeeds only if every plan cell is filled with its required material in time;
it fails otherwise.

## The build
The floor plan has {config.plan.total_cells()} cells in layered courses:
{layers}.  Material totals: {", ".join(f"{m}: {n}" for m, n in sorted(counts.items()))}.
Materials come from resource towers and are mined by hand or, much faster,
with a pickaxe crafted from {config.pickaxe_wood_cost} wood at the crafting
table.  The storage chest is the hand-off point between teammates.

## Roster
- builder (human): can mine, craft, use the chest, and is the only agent able
  to place blocks for phases driven by the decision-tree helper.
- helper (ai): {AI_DESCRIPTIONS[ai]}

## Mission phases
The decision-tree helper moves through five phases as completion crosses
{", ".join(f"{t:.0%}" for t in config.phase_thresholds.values)}: (1) tool up and
bank wood, (2) gather what the builder is not gathering, (3) keep the chest
stocked with the current course's material, (4) pre-stage the next course,
(5) bank everything and stand by near the chest.

## Answering guidance
Ground every answer in the mission timeline events; cite event timestamps
(t=<seconds>) for claims about what happened or which phase was active.  If
the timeline does not support an answer, say so.
"""
