"""Skill plans: multi-tick intents agents execute between decisions.

A plan turns one observation into the next primitive action request, or None
once its goal is met (or can no longer be met — ``failed`` distinguishes the
two).  Plans re-derive paths from the current observation every call, so a
wall placed mid-walk just reroutes the next step.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .. import protocol as P
from ..config import Cell
from ..pathfinding import InvalidEndpoint, Unreachable, plan_path
from ..world import PICKAXE, PLACED
from .observation import Observation, distance_to_cell

_ARRIVED = 0.1  # cells from a cell center that counts as standing on it


class Plan:
    failed: bool = False

    def next_action(self, obs: Observation) -> P.ActionRequest | None:
        raise NotImplementedError


def nav_step(obs: Observation, goal: Cell, *, adjacent: bool) -> P.MoveTo | None:
    """Next walk action toward a goal cell, or None when no route exists."""
    me = obs.self_view()
    my_cell = (math.floor(me.position[0]), math.floor(me.position[1]))
    try:
        path = plan_path(obs.nav_grid(), my_cell, tuple(goal), adjacent_to_goal=adjacent)
    except (Unreachable, InvalidEndpoint):
        return None
    target = path[1] if len(path) > 1 else path[0]
    return P.MoveTo(target=target)


def _observation_fingerprint(obs: Observation) -> tuple:
    me = obs.self_view()
    return (
        obs.phase,
        obs.completion,
        tuple(sorted(obs.chest.items())),
        tuple(sorted(me.inventory.counts.items())),
        (math.floor(p[0]), math.floor(p[1])) if (p := obs.human_position()) else None,
    )


@dataclass
class IdlePlan(Plan):
    """Hold position until the mission state meaningfully changes."""

    fingerprint: tuple

    @classmethod
    def from_obs(cls, obs: Observation) -> "IdlePlan":
        return cls(fingerprint=_observation_fingerprint(obs))

    def next_action(self, obs):
        if _observation_fingerprint(obs) != self.fingerprint:
            return None
        return P.Idle()


@dataclass
class NavigatePlan(Plan):
    goal: Cell
    stop_within: float
    adjacent: bool = False

    def next_action(self, obs):
        me = obs.self_view()
        if distance_to_cell(me.position, self.goal) <= self.stop_within:
            return None
        action = nav_step(obs, self.goal, adjacent=self.adjacent)
        if action is None:
            self.failed = True
        return action


@dataclass
class GatherPlan(Plan):
    material: str
    until_count: int
    target: Cell | None = None
    # Builders set this: stop digging as soon as a teammate stocks the chest —
    # but never mid-block, which would throw away accrued mining progress.
    abort_on_chest: bool = False
    _mine_streak: int = 0
    _last_count: int | None = None

    def next_action(self, obs):
        count = obs.carrying(self.material)
        if self._last_count is not None and count > self._last_count:
            self._mine_streak = 0  # a block popped; safe to change plans
        self._last_count = count
        if count >= self.until_count:
            return None
        if self.abort_on_chest and self._mine_streak == 0 and obs.chest.get(self.material, 0) > 0:
            return None
        me = obs.self_view()
        if obs.carrying() >= obs.layout.inventory_capacity:
            self.failed = True
            return None
        block = obs.block(self.target) if self.target else None
        if block is None or block["kind"] != "tower_block" or block.get("remaining", 0) <= 0:
            self.target = _nearest_stocked_tower(obs, self.material)
            self._mine_streak = 0
            if self.target is None:
                self.failed = True
                return None
        if distance_to_cell(me.position, self.target) <= obs.layout.reach_radius:
            self._mine_streak += 1
            return P.Mine(target=self.target)
        action = nav_step(obs, self.target, adjacent=True)
        if action is None:
            self.failed = True
        return action


def _nearest_stocked_tower(obs: Observation, material: str) -> Cell | None:
    me = obs.self_view()
    my_cell = (math.floor(me.position[0]), math.floor(me.position[1]))
    cells = obs.stocked_tower_cells(material)
    if not cells:
        return None
    return min(cells, key=lambda c: (abs(c[0] - my_cell[0]) + abs(c[1] - my_cell[1]), c))


@dataclass
class CraftPlan(Plan):
    def next_action(self, obs):
        me = obs.self_view()
        if PICKAXE in me.inventory.tools:
            return None
        if me.inventory.counts.get("wood", 0) < obs.layout.pickaxe_wood_cost:
            self.failed = True
            return None
        table = obs.layout.crafting_table
        if distance_to_cell(me.position, table) <= obs.layout.reach_radius:
            return P.Craft(item=PICKAXE)
        action = nav_step(obs, table, adjacent=True)
        if action is None:
            self.failed = True
        return action


@dataclass
class DepositPlan(Plan):
    material: str | None = None  # None = bank everything carried
    n: int | None = None
    _issued: bool = False

    def next_action(self, obs):
        me = obs.self_view()
        counts = {m: c for m, c in me.inventory.counts.items() if c > 0}
        if self.material is None:
            if not counts:
                return None
        else:
            if self._issued:
                return None
            if counts.get(self.material, 0) == 0:
                self.failed = True
                return None
        chest = obs.layout.chest
        if distance_to_cell(me.position, chest) <= obs.layout.reach_radius:
            if self.material is None:
                material = min(counts, key=lambda m: (-counts[m], m))
                return P.ChestOp(direction="deposit", material=material, n=counts[material])
            self._issued = True
            amount = min(self.n or counts[self.material], counts[self.material])
            return P.ChestOp(direction="deposit", material=self.material, n=amount)
        action = nav_step(obs, chest, adjacent=True)
        if action is None:
            self.failed = True
        return action


@dataclass
class WithdrawPlan(Plan):
    material: str
    n: int
    issued: bool = False

    def next_action(self, obs):
        if self.issued:
            return None
        stock = obs.chest.get(self.material, 0)
        if stock <= 0:
            self.failed = True
            return None
        me = obs.self_view()
        chest = obs.layout.chest
        if distance_to_cell(me.position, chest) <= obs.layout.reach_radius:
            self.issued = True
            return P.ChestOp(
                direction="withdraw", material=self.material, n=min(self.n, stock)
            )
        action = nav_step(obs, chest, adjacent=True)
        if action is None:
            self.failed = True
        return action


@dataclass
class PlacePlan(Plan):
    target: Cell
    material: str

    def next_action(self, obs):
        if obs.block(self.target)["kind"] == PLACED:
            return None
        me = obs.self_view()
        if me.inventory.counts.get(self.material, 0) < 1:
            self.failed = True
            return None
        if distance_to_cell(me.position, self.target) <= obs.layout.reach_radius:
            return P.Place(target=self.target, material=self.material)
        approach = self._approach_cell(obs)
        if approach is None:
            self.failed = True
            return None
        return P.MoveTo(target=approach)

    def _approach_cell(self, obs) -> Cell | None:
        """Next step toward a walkable neighbor, preferring the outside of the
        footprint so builders do not wall themselves in."""
        grid = obs.nav_grid()
        cx, cy = obs.layout.plan_centroid()
        candidates = [
            (self.target[0] + dx, self.target[1] + dy)
            for dx, dy in ((0, -1), (1, 0), (0, 1), (-1, 0))
            if grid.walkable((self.target[0] + dx, self.target[1] + dy))
        ]
        candidates.sort(
            key=lambda c: (-math.hypot(c[0] + 0.5 - cx, c[1] + 0.5 - cy), c)
        )
        for cell in candidates:
            step = nav_step(obs, cell, adjacent=False)
            if step is not None:
                return step.target
        return None
