"""The white-box decision-tree AI agent.

``decide`` is the pure core: observation in, (action, trace) out.  The
runtime around it adds skill continuation — while a plan is underway the agent
keeps executing it on every broadcast and only consults the tree again when
the plan finishes or fails, so traces mark real decision points rather than
every tick.
"""

from __future__ import annotations

import math

from .. import protocol as P
from ..inference import HumanInference, infer_human_behavior
from ..phase import current_phase
from ..policy import DecisionTreePolicy, Leaf, _resolve_material, evaluate_tree
from .observation import Layout, Observation, ObservationTracker, distance_to_cell
from .plans import (
    CraftPlan,
    DepositPlan,
    GatherPlan,
    IdlePlan,
    NavigatePlan,
    Plan,
)

LANDMARK_CELLS = {
    "chest": lambda layout: layout.chest,
    "crafting_table": lambda layout: layout.crafting_table,
}


def complement_material(obs: Observation, inference: HumanInference) -> str | None:
    """First needed material the human is not already gathering."""
    from ..world import gathering_material

    human_material = gathering_material(inference.activity)
    needed = obs.needed_materials()
    for material in needed:
        if material != human_material:
            return material
    return needed[0] if needed else None


def resolve_skill(leaf: Leaf, obs: Observation, inference: HumanInference) -> Plan:
    if leaf.skill == "gather":
        spec = leaf.args.get("material", "current_layer")
        if spec == "complement":
            material = complement_material(obs, inference)
        else:
            material = _resolve_material(spec, obs)
            if material is not None and obs.outstanding_need(material) <= 0:
                needed = obs.needed_materials()
                material = needed[0] if needed else None
        if material is None:
            return _idle_off_the_plan(obs)
        return GatherPlan(material=material, until_count=obs.carrying(material) + 1)

    if leaf.skill == "craft_pickaxe":
        return CraftPlan()

    if leaf.skill == "deposit":
        return DepositPlan()

    if leaf.skill == "go_to":
        landmark = leaf.args.get("landmark", "chest")
        cell = LANDMARK_CELLS[landmark](obs.layout)
        within = float(leaf.args.get("within", 2.0))
        me = obs.self_view()
        if distance_to_cell(me.position, cell) <= within:
            return _idle_off_the_plan(obs)
        return NavigatePlan(goal=cell, stop_within=within, adjacent=True)

    return _idle_off_the_plan(obs)


def _idle_off_the_plan(obs: Observation) -> Plan:
    """Idle, but never while standing on an unbuilt plan cell (it would block
    the builder indefinitely)."""
    me = obs.self_view()
    cell = (math.floor(me.position[0]), math.floor(me.position[1]))
    if cell in obs.layout.plan_cells():
        grid = obs.nav_grid()
        plan = obs.layout.plan_cells()
        best = None
        for radius in range(1, max(obs.layout.width, obs.layout.height)):
            ring = [
                (cell[0] + dx, cell[1] + dy)
                for dx in range(-radius, radius + 1)
                for dy in range(-radius, radius + 1)
                if max(abs(dx), abs(dy)) == radius
            ]
            options = [c for c in sorted(ring) if grid.walkable(c) and c not in plan]
            if options:
                best = options[0]
                break
        if best is not None:
            return NavigatePlan(goal=best, stop_within=_CENTERED, adjacent=False)
    return IdlePlan.from_obs(obs)


_CENTERED = 0.1


def decide_full(
    policy: DecisionTreePolicy, obs: Observation
) -> tuple[P.ActionRequest, P.DecisionTraceView, Plan]:
    human = obs.human_view()
    if human is not None:
        inference = infer_human_behavior(human, obs.layout, obs.human_speed)
    else:
        inference = HumanInference(activity="idle", proximity={})
    phase = current_phase(min(max(obs.completion, 0.0), 1.0), policy.thresholds)
    leaf, branch = evaluate_tree(policy.trees[phase], obs, inference)
    plan = resolve_skill(leaf, obs, inference)
    action = plan.next_action(obs)
    if action is None:
        plan = IdlePlan.from_obs(obs)
        action = P.Idle()
    trace = P.DecisionTraceView(
        agent_id=obs.self_id,
        sim_time=obs.clock,
        phase=phase,
        active_branch=tuple(P.TraceStep(node=n, result=r) for n, r in branch),
        selected_node=leaf.name,
        emitted_action=action,
    )
    return action, trace, plan


def decide(
    policy: DecisionTreePolicy, obs: Observation
) -> tuple[P.ActionRequest, P.DecisionTraceView]:
    """Pure policy evaluation: same observation, same (action, trace)."""
    action, trace, _ = decide_full(policy, obs)
    return action, trace


class DtRuntime:
    """Drives one decision-tree agent from a stream of state updates."""

    def __init__(self, agent_id: str, policy: DecisionTreePolicy, layout: Layout):
        self.agent_id = agent_id
        self.policy = policy
        self.tracker = ObservationTracker(agent_id, layout)
        self.plan: Plan | None = None
        self.decision_count = 0

    def on_state_update(
        self, update: P.StateUpdate
    ) -> tuple[P.ActionRequest, P.DecisionTraceView | None]:
        obs = self.tracker.build(update)
        if self.plan is not None:
            action = self.plan.next_action(obs)
            if action is not None:
                return action, None
            self.plan = None
        action, trace, plan = decide_full(self.policy, obs)
        self.plan = plan
        self.decision_count += 1
        return action, trace

    def on_error(self, code: str, detail: str = "") -> None:
        # A rejected action means the plan's model of the world was stale.
        self.plan = None
