"""Chat-commanded AI teammate: natural-language requests become skill calls.

Interpretation is two-tier.  A language model, when configured, translates a
command into a JSON skill sequence which is validated against the closed skill
library; output that fails validation gets one retry with the validator's
complaint appended, then the rule grammar takes over.  The rule grammar alone
is fully deterministic and is what the test suite pins down.

Unlike the decision-tree agent this one can place blocks — it has the same
capabilities as the player commanding it.
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field

from .. import protocol as P
from ..errors import CobuildError, LlmUnavailable
from ..llm import LanguageModelClient
from .observation import Layout, Observation, ObservationTracker
from .plans import (
    CraftPlan,
    DepositPlan,
    GatherPlan,
    NavigatePlan,
    Plan,
    PlacePlan,
    WithdrawPlan,
)

SKILL_LIBRARY = ("go_to", "mine", "craft", "chest_deposit", "chest_withdraw", "place", "say")


class SkillError(CobuildError):
    default_code = "invalid-skill"


@dataclass(frozen=True)
class SkillCall:
    skill: str
    args: dict

    def __str__(self) -> str:
        inner = ", ".join(f"{k}={v}" for k, v in sorted(self.args.items()))
        return f"{self.skill}({inner})"


@dataclass
class ConversationEntry:
    sim_time: float
    speaker: str
    text: str
    resolved_skills: list[SkillCall] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "sim_time": self.sim_time,
            "speaker": self.speaker,
            "text": self.text,
            "resolved_skills": [
                {"skill": s.skill, "args": s.args} for s in self.resolved_skills
            ],
        }


@dataclass
class ConversationRecord:
    entries: list[ConversationEntry] = field(default_factory=list)

    def to_json(self) -> str:
        return json.dumps(
            [e.to_dict() for e in self.entries], indent=1, sort_keys=True
        )


# ---------------------------------------------------------------------------
# Validation
# ---------------------------------------------------------------------------


def validate_skill_call(
    call: SkillCall, materials: list[str], forbidden: frozenset[str] = frozenset()
) -> None:
    if call.skill not in SKILL_LIBRARY:
        raise SkillError(detail=f"unknown skill {call.skill!r}")
    if call.skill in forbidden:
        raise SkillError("forbidden-skill", f"{call.skill} is disallowed by the context")
    args = call.args
    if call.skill == "go_to":
        target = args.get("target")
        landmarks = {"chest", "crafting_table", "plan"} | {
            f"tower:{m}" for m in materials
        }
        if target not in landmarks and not (
            isinstance(target, (list, tuple)) and len(target) == 2
        ):
            raise SkillError(detail=f"go_to target {target!r}")
    elif call.skill in ("mine", "place"):
        if args.get("material") not in materials:
            raise SkillError(detail=f"{call.skill} material {args.get('material')!r}")
    elif call.skill in ("chest_deposit", "chest_withdraw"):
        if args.get("material") not in materials:
            raise SkillError(detail=f"{call.skill} material {args.get('material')!r}")
        n = args.get("n", 1)
        if not isinstance(n, int) or isinstance(n, bool) or n < 0:
            raise SkillError(detail=f"{call.skill} amount {n!r}")
    elif call.skill == "craft":
        if args.get("item", "pickaxe") != "pickaxe":
            raise SkillError(detail=f"craft item {args.get('item')!r}")
    elif call.skill == "say":
        if not isinstance(args.get("text", ""), str):
            raise SkillError(detail="say needs text")


# ---------------------------------------------------------------------------
# Rule grammar
# ---------------------------------------------------------------------------

_CLAUSE_SPLIT = re.compile(r"\s*(?:\band\s+then\b|\bthen\b|\band\b|[;,.])\s*", re.IGNORECASE)
_NUMBER_WORDS = {
    "a": 1, "an": 1, "one": 1, "two": 2, "three": 3, "four": 4, "five": 5,
    "six": 6, "seven": 7, "eight": 8, "nine": 9, "ten": 10,
}


def _amount(token: str | None, default: int = 1) -> int:
    if not token:
        return default
    token = token.lower()
    if token.isdigit():
        return int(token)
    return _NUMBER_WORDS.get(token, default)


def parse_command(text: str, materials: list[str]) -> tuple[str, list[SkillCall]]:
    """Deterministic verb-object-quantity grammar over the skill library."""
    mat = "|".join(re.escape(m) for m in materials)
    amount = r"(\d+|a|an|one|two|three|four|five|six|seven|eight|nine|ten)?"
    gather_re = re.compile(
        rf"\b(?:get|mine|gather|collect|chop|fetch|grab)\b(?:\s+(?:me|us|some))?\s*{amount}\s*({mat})(?:s|\s|$)",
        re.IGNORECASE,
    )
    withdraw_re = re.compile(
        rf"\b(?:withdraw|take|grab|get)\b\s*{amount}\s*({mat})s?\b.*\bfrom\b.*\bchest\b",
        re.IGNORECASE,
    )
    deposit_re = re.compile(
        rf"\b(?:put|store|deposit|stash|drop)\b\s*{amount}\s*({mat}|it|them|those|everything)?s?\b.*\bchest\b",
        re.IGNORECASE,
    )
    craft_re = re.compile(r"\b(?:craft|make)\b.*\bpickaxe\b", re.IGNORECASE)
    place_re = re.compile(
        rf"\b(?:place|lay|build with)\b\s*{amount}\s*({mat}|it|them)?s?\b", re.IGNORECASE
    )
    goto_re = re.compile(
        rf"\bgo\b(?:\s+(?:to|over to|back to))?\s+(?:the\s+)?"
        rf"(chest|crafting\s*table|table|({mat})\s+tower|house|plan)\b",
        re.IGNORECASE,
    )

    skills: list[SkillCall] = []
    spoken: list[str] = []
    last_material: str | None = None
    last_amount = 1

    for clause in filter(None, _CLAUSE_SPLIT.split(text)):
        matched = withdraw_re.search(clause)
        if matched:
            n = _amount(matched.group(1))
            material = matched.group(2).lower()
            skills.append(SkillCall("go_to", {"target": "chest"}))
            skills.append(SkillCall("chest_withdraw", {"material": material, "n": n}))
            spoken.append(f"withdrawing {n} {material} from the chest")
            last_material, last_amount = material, n
            continue
        matched = deposit_re.search(clause)
        if matched:
            token = (matched.group(2) or "it").lower()
            if token in ("it", "them", "those", "everything"):
                material, n = last_material, _amount(matched.group(1), last_amount)
            else:
                material, n = token, _amount(matched.group(1))
            if material is None:
                spoken.append("deposit what, exactly?")
                continue
            skills.append(SkillCall("go_to", {"target": "chest"}))
            skills.append(SkillCall("chest_deposit", {"material": material, "n": n}))
            spoken.append(f"depositing {n} {material} into the chest")
            continue
        matched = craft_re.search(clause)
        if matched:
            skills.append(SkillCall("go_to", {"target": "crafting_table"}))
            skills.append(SkillCall("craft", {"item": "pickaxe"}))
            spoken.append("crafting a pickaxe")
            continue
        matched = gather_re.search(clause)
        if matched:
            n = _amount(matched.group(1))
            material = matched.group(2).lower()
            skills.append(SkillCall("go_to", {"target": f"tower:{material}"}))
            skills.extend(SkillCall("mine", {"material": material}) for _ in range(n))
            spoken.append(f"gathering {n} {material}")
            last_material, last_amount = material, n
            continue
        matched = place_re.search(clause)
        if matched:
            token = (matched.group(2) or "it").lower()
            if token in ("it", "them"):
                material, n = last_material, _amount(matched.group(1), last_amount)
            else:
                material, n = token, _amount(matched.group(1))
            if material is None:
                spoken.append("place what, exactly?")
                continue
            skills.extend(
                SkillCall("place", {"material": material}) for _ in range(n)
            )
            spoken.append(f"placing {n} {material} on the plan")
            last_material = material
            continue
        matched = goto_re.search(clause)
        if matched:
            landmark = matched.group(1).lower()
            tower = matched.group(2)
            if tower:
                target = f"tower:{tower.lower()}"
            elif landmark in ("crafting table", "craftingtable", "table"):
                target = "crafting_table"
            elif landmark in ("house", "plan"):
                target = "plan"
            else:
                target = "chest"
            skills.append(SkillCall("go_to", {"target": target}))
            spoken.append(f"heading to the {landmark}")
            continue

    if not skills:
        if spoken:
            return " ".join(spoken).capitalize(), []
        return (
            "I did not catch an instruction there — try something like "
            "'get 5 wood and put it in the chest'.",
            [],
        )
    return "On it: " + ", ".join(spoken) + ".", skills


# ---------------------------------------------------------------------------
# Context file
# ---------------------------------------------------------------------------

_FORBID_LINE = re.compile(r"^\s*forbid[_ ]skills?\s*:\s*(.+)$", re.IGNORECASE | re.MULTILINE)


@dataclass(frozen=True)
class ContextDoc:
    text: str
    forbidden_skills: frozenset[str]


def load_context_file(path) -> ContextDoc:
    try:
        with open(path, "r", encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise CobuildError("missing-file", str(exc)) from exc
    forbidden = frozenset(
        skill.strip().lower()
        for match in _FORBID_LINE.finditer(text)
        for skill in match.group(1).split(",")
        if skill.strip()
    )
    return ContextDoc(text=text, forbidden_skills=forbidden)


# ---------------------------------------------------------------------------
# Interpretation (LLM first, rules as fallback and validator backstop)
# ---------------------------------------------------------------------------

_LLM_TEMPLATE = """{context}

You control a teammate agent in a collaborative building task.
World summary: {summary}
Skill library: go_to(target), mine(material), craft(item=pickaxe),
chest_deposit(material, n), chest_withdraw(material, n), place(material), say(text).
Materials: {materials}.

Translate the player's command into skills.  Answer with JSON only:
{{"reply": "<conversational confirmation>", "skills": [{{"skill": "...", "args": {{...}}}}]}}

Player command: {command}
"""


def _parse_llm_reply(raw: str, materials, forbidden) -> tuple[str, list[SkillCall]]:
    start, end = raw.find("{"), raw.rfind("}")
    if start < 0 or end <= start:
        raise SkillError(detail="reply carried no JSON object")
    try:
        data = json.loads(raw[start : end + 1])
    except json.JSONDecodeError as exc:
        raise SkillError(detail=f"bad JSON: {exc}") from exc
    skills = []
    for item in data.get("skills", []):
        call = SkillCall(skill=str(item.get("skill")), args=dict(item.get("args", {})))
        validate_skill_call(call, materials, forbidden)
        skills.append(call)
    return str(data.get("reply", "Okay.")), skills


def interpret_command(
    text: str,
    world_summary: str,
    llm: LanguageModelClient | None,
    *,
    materials: list[str],
    context: ContextDoc | None = None,
) -> tuple[str, list[SkillCall]]:
    """Command text -> (conversational reply, validated skill sequence)."""
    if not text.strip():
        raise CobuildError("empty-command")
    forbidden = context.forbidden_skills if context else frozenset()

    if llm is not None:
        prompt = _LLM_TEMPLATE.format(
            context=context.text if context else "",
            summary=world_summary,
            materials=", ".join(materials),
            command=text,
        )
        try:
            for attempt in range(2):
                raw = llm.complete(prompt)
                try:
                    return _parse_llm_reply(raw, materials, forbidden)
                except SkillError as err:
                    if attempt == 0:
                        prompt += (
                            f"\nYour previous answer was rejected: {err.detail}. "
                            "Answer again with valid JSON and only library skills."
                        )
        except LlmUnavailable:
            pass  # fall through to the rule grammar

    reply, skills = parse_command(text, materials)
    kept = [s for s in skills if s.skill not in forbidden]
    if len(kept) != len(skills):
        dropped = sorted({s.skill for s in skills} - {s.skill for s in kept})
        reply += f" (Skipping {', '.join(dropped)}: not permitted for this mission.)"
    return reply, kept


# ---------------------------------------------------------------------------
# Runtime
# ---------------------------------------------------------------------------

_LANDMARK_STOP = 1.2


class CommandRuntime:
    """Executes queued skill calls one at a time between broadcasts."""

    def __init__(
        self,
        agent_id: str,
        layout: Layout,
        context: ContextDoc | None = None,
        llm: LanguageModelClient | None = None,
    ):
        self.agent_id = agent_id
        self.layout = layout
        self.context = context
        self.llm = llm
        self.tracker = ObservationTracker(agent_id, layout)
        self.queue: deque[SkillCall] = deque()
        self.plan: Plan | None = None
        self.conversation = ConversationRecord()
        self.outgoing_chat: deque[str] = deque()
        self._last_obs: Observation | None = None

    # -- chat ------------------------------------------------------------

    def on_chat(self, from_id: str, text: str, sim_time: float) -> None:
        if from_id == self.agent_id:
            return
        materials = self.layout.tower_materials()
        summary = self._world_summary()
        reply, skills = interpret_command(
            text, summary, self.llm, materials=materials, context=self.context
        )
        self.conversation.entries.append(
            ConversationEntry(sim_time=sim_time, speaker="human", text=text)
        )
        self.conversation.entries.append(
            ConversationEntry(
                sim_time=sim_time, speaker="ai", text=reply, resolved_skills=list(skills)
            )
        )
        self.queue.extend(skills)
        self.outgoing_chat.append(reply)

    def _world_summary(self) -> str:
        obs = self._last_obs
        if obs is None:
            return "mission just started"
        return (
            f"clock={obs.clock:.1f}s completion={obs.completion:.2f} "
            f"chest={obs.chest} carrying={dict(obs.self_view().inventory.counts)}"
        )

    # -- action loop -------------------------------------------------------

    def on_state_update(self, update: P.StateUpdate) -> P.ActionRequest:
        obs = self.tracker.build(update)
        self._last_obs = obs
        while True:
            if self.plan is not None:
                action = self.plan.next_action(obs)
                if action is not None:
                    return action
                self.plan = None
            if not self.queue:
                return P.Idle()
            self.plan = self._plan_for(self.queue.popleft(), obs)

    def on_error(self, code: str, detail: str = "") -> None:
        self.plan = None

    def _plan_for(self, call: SkillCall, obs: Observation) -> Plan | None:
        """Plan for one skill call; None for skills that resolve instantly."""
        args = call.args
        if call.skill == "go_to":
            return NavigatePlan(
                goal=self._landmark_cell(args["target"], obs),
                stop_within=_LANDMARK_STOP,
                adjacent=True,
            )
        if call.skill == "mine":
            material = args["material"]
            return GatherPlan(material=material, until_count=obs.carrying(material) + 1)
        if call.skill == "craft":
            return CraftPlan()
        if call.skill == "chest_deposit":
            return DepositPlan(material=args["material"], n=args.get("n", 1))
        if call.skill == "chest_withdraw":
            return WithdrawPlan(material=args["material"], n=args.get("n", 1))
        if call.skill == "place":
            material = args["material"]
            for i, (m, _) in enumerate(obs.layout.layers):
                if m == material:
                    remaining = obs.unfilled_layer_cells(i)
                    if remaining:
                        return PlacePlan(target=remaining[0], material=material)
            return None  # nothing left to place with that material
        if call.skill == "say":
            self.outgoing_chat.append(str(args.get("text", "")))
        return None

    def _landmark_cell(self, target, obs: Observation):
        if isinstance(target, (list, tuple)):
            return tuple(target)
        if target == "chest":
            return self.layout.chest
        if target == "crafting_table":
            return self.layout.crafting_table
        if target == "plan":
            cx, cy = self.layout.plan_centroid()
            return (int(cx), int(cy))
        if target.startswith("tower:"):
            cells = obs.stocked_tower_cells(target.split(":", 1)[1])
            if not cells:
                cells = self.layout.tower_cells(target.split(":", 1)[1])
            me = obs.self_view()
            my_cell = (int(me.position[0]), int(me.position[1]))
            return min(
                cells, key=lambda c: (abs(c[0] - my_cell[0]) + abs(c[1] - my_cell[1]), c)
            )
        return self.layout.chest
