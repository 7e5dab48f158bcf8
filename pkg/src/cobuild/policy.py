"""Declarative five-phase decision-tree policies for the collaborative AI.

A policy is data, not code: a JSON document maps each phase (1..5) to a binary
tree whose internal nodes name predicates from ``PREDICATES`` and whose leaves
name skills from ``TREE_SKILLS``.  New nodes or phases are added by editing
the file — see ``docs/policy-format.md``.

The leaf skill vocabulary deliberately excludes ``place``: policies drive
agents that may never place blocks, and the loader enforces that statically.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import Callable, Union

from .errors import ConfigError
from .inference import HumanInference
from .phase import PHASE_COUNT, PhaseThresholds
from .world import gathering_material

# Skills a tree leaf may invoke.  No "place" here, by design.
TREE_SKILLS = frozenset({"gather", "craft_pickaxe", "deposit", "go_to", "idle"})


@dataclass(frozen=True)
class Leaf:
    name: str
    skill: str
    args: dict


@dataclass(frozen=True)
class Branch:
    name: str
    predicate: str
    args: dict
    on_true: "Node"
    on_false: "Node"


Node = Union[Leaf, Branch]


@dataclass(frozen=True)
class DecisionTreePolicy:
    name: str
    thresholds: PhaseThresholds
    trees: dict[int, Node]  # phase -> root


# ---------------------------------------------------------------------------
# Predicates
# ---------------------------------------------------------------------------


def _resolve_material(spec: str, obs) -> str | None:
    """Material selectors usable in predicate/skill args.

    ``current_layer`` / ``next_layer`` follow build progress; anything else is
    taken literally.  Returns None when the selector has no referent (e.g. the
    plan is finished).
    """
    if spec == "current_layer":
        layer = obs.current_layer()
        return obs.layout.layers[layer][0] if layer is not None else None
    if spec == "next_layer":
        layer = obs.current_layer()
        if layer is None:
            return None
        for i in range(layer + 1, len(obs.layout.layers)):
            if obs.unfilled_layer_cells(i):
                return obs.layout.layers[i][0]
        return obs.layout.layers[layer][0]
    return spec


def _pred_has_pickaxe(obs, inference, args) -> bool:
    return "pickaxe" in obs.self_view().inventory.tools


def _pred_carrying_at_least(obs, inference, args) -> bool:
    spec = args.get("material", "any")
    n = int(args.get("n", 1))
    if spec == "any":
        return obs.carrying() >= n
    material = _resolve_material(spec, obs)
    return material is not None and obs.carrying(material) >= n


def _pred_human_activity_is(obs, inference, args) -> bool:
    want = args["activity"]
    if want != "gathering":
        return inference.activity == want
    got = gathering_material(inference.activity)
    if got is None:
        return False
    spec = args.get("material", "any")
    if spec == "any":
        return True
    material = _resolve_material(spec, obs)
    return material == got


def _pred_chest_has_at_least(obs, inference, args) -> bool:
    material = _resolve_material(args.get("material", "current_layer"), obs)
    if material is None:
        return True  # nothing left to stock
    return obs.chest.get(material, 0) >= int(args.get("n", 1))


def _pred_completion_at_least(obs, inference, args) -> bool:
    return obs.completion >= float(args["fraction"])


def _pred_human_within(obs, inference, args) -> bool:
    landmark = args["landmark"]
    radius = float(args.get("radius", 2.0))
    return inference.proximity.get(landmark, float("inf")) <= radius


PREDICATES: dict[str, Callable] = {
    "has_pickaxe": _pred_has_pickaxe,
    "carrying_at_least": _pred_carrying_at_least,
    "human_activity_is": _pred_human_activity_is,
    "chest_has_at_least": _pred_chest_has_at_least,
    "completion_at_least": _pred_completion_at_least,
    "human_within": _pred_human_within,
}


# ---------------------------------------------------------------------------
# Loading / validation
# ---------------------------------------------------------------------------


def _parse_node(data: dict, seen_names: set, where: str) -> Node:
    if not isinstance(data, dict):
        raise ConfigError(detail=f"{where}: node must be an object")
    if "leaf" in data:
        name = data["leaf"]
        skill = data.get("skill")
        if skill not in TREE_SKILLS:
            raise ConfigError(
                detail=f"{where}: leaf {name!r} uses skill {skill!r}, "
                f"allowed: {sorted(TREE_SKILLS)}"
            )
        node: Node = Leaf(name=name, skill=skill, args=dict(data.get("args", {})))
    elif "node" in data:
        name = data["node"]
        predicate = data.get("predicate")
        if predicate not in PREDICATES:
            raise ConfigError(detail=f"{where}: unknown predicate {predicate!r}")
        if "true" not in data or "false" not in data:
            raise ConfigError(detail=f"{where}: node {name!r} needs true and false children")
        node = Branch(
            name=name,
            predicate=predicate,
            args=dict(data.get("args", {})),
            on_true=_parse_node(data["true"], seen_names, where),
            on_false=_parse_node(data["false"], seen_names, where),
        )
    else:
        raise ConfigError(detail=f"{where}: node needs a 'node' or 'leaf' key")
    if node.name in seen_names:
        raise ConfigError(detail=f"{where}: duplicate node name {node.name!r}")
    seen_names.add(node.name)
    return node


def policy_from_dict(data: dict) -> DecisionTreePolicy:
    phases = data.get("phases")
    if not isinstance(phases, dict):
        raise ConfigError(detail="policy needs a 'phases' object")
    trees: dict[int, Node] = {}
    for phase in range(1, PHASE_COUNT + 1):
        key = str(phase)
        if key not in phases:
            raise ConfigError(detail=f"policy is missing phase {phase}")
        trees[phase] = _parse_node(phases[key], set(), f"phase {phase}")
    thresholds = PhaseThresholds(
        tuple(float(t) for t in data.get("thresholds", (0.2, 0.4, 0.6, 0.8)))
    )
    return DecisionTreePolicy(
        name=str(data.get("name", "unnamed")), thresholds=thresholds, trees=trees
    )


def load_policy(path) -> DecisionTreePolicy:
    with open(path, "r", encoding="utf-8") as fh:
        return policy_from_dict(json.load(fh))


def default_policy() -> DecisionTreePolicy:
    ref = resources.files("cobuild").joinpath("policies/default.json")
    return policy_from_dict(json.loads(ref.read_text()))


# ---------------------------------------------------------------------------
# Evaluation
# ---------------------------------------------------------------------------


def evaluate_tree(
    root: Node, obs, inference: HumanInference
) -> tuple[Leaf, list[tuple[str, bool]]]:
    """Walk a phase tree, returning the selected leaf and the branch taken."""
    branch: list[tuple[str, bool]] = []
    node = root
    while isinstance(node, Branch):
        result = bool(PREDICATES[node.predicate](obs, inference, node.args))
        branch.append((node.name, result))
        node = node.on_true if result else node.on_false
    return node, branch


def validate_branch(policy: DecisionTreePolicy, phase: int, steps, selected: str) -> bool:
    """Structural check: do the recorded steps walk the phase tree to that leaf?"""
    node = policy.trees.get(phase)
    if node is None:
        return False
    for name, result in steps:
        if not isinstance(node, Branch) or node.name != name:
            return False
        node = node.on_true if result else node.on_false
    return isinstance(node, Leaf) and node.name == selected
