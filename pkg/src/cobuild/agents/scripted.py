"""Deterministic scripted builder standing in for a live human player.

Strategy: craft a pickaxe first, then work the plan layer by layer in
row-major order — placing carried blocks, withdrawing from the chest when a
teammate has stocked it, and mining the layer material otherwise.
"""

from __future__ import annotations

from .. import protocol as P
from ..world import PICKAXE
from .observation import Layout, Observation, ObservationTracker
from .plans import (
    CraftPlan,
    GatherPlan,
    IdlePlan,
    Plan,
    PlacePlan,
    WithdrawPlan,
)

GATHER_BATCH = 4


class ScriptedHumanRuntime:
    def __init__(self, agent_id: str, layout: Layout):
        self.agent_id = agent_id
        self.tracker = ObservationTracker(agent_id, layout)
        self.plan: Plan | None = None

    def on_state_update(self, update: P.StateUpdate) -> P.ActionRequest:
        obs = self.tracker.build(update)
        if self.plan is not None:
            action = self.plan.next_action(obs)
            if action is not None:
                return action
            self.plan = None
        self.plan = self._decide(obs)
        action = self.plan.next_action(obs)
        if action is None:
            self.plan = IdlePlan.from_obs(obs)
            action = P.Idle()
        return action

    def on_error(self, code: str, detail: str = "") -> None:
        self.plan = None

    def _decide(self, obs: Observation) -> Plan:
        me = obs.self_view()
        if PICKAXE not in me.inventory.tools:
            cost = obs.layout.pickaxe_wood_cost
            if me.inventory.counts.get("wood", 0) >= cost:
                return CraftPlan()
            return GatherPlan(material="wood", until_count=cost)

        layer = obs.current_layer()
        if layer is None:
            return IdlePlan.from_obs(obs)
        material = obs.layout.layers[layer][0]
        remaining = obs.unfilled_layer_cells(layer)
        if obs.carrying(material) >= 1:
            return PlacePlan(target=remaining[0], material=material)
        room = obs.layout.inventory_capacity - obs.carrying()
        want = min(len(remaining), GATHER_BATCH, room)
        if obs.chest.get(material, 0) > 0:
            return WithdrawPlan(material=material, n=max(want, 1))
        return GatherPlan(
            material=material,
            until_count=obs.carrying(material) + max(want, 1),
            abort_on_chest=True,
        )
