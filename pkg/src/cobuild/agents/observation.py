"""Client-side world model: static mission layout plus per-broadcast state.

Agents never see ``WorldState``.  They receive a ``mission_brief`` once and
``state_update`` broadcasts after that; ``ObservationTracker`` folds those into
an ``Observation`` — the immutable input every agent decision is a pure
function of.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .. import protocol as P
from ..config import Cell, MissionConfig
from ..pathfinding import NavGrid
from ..world import PLACED, SOLID_KINDS, TOWER, init_world

GROUND_BLOCK = {"kind": "ground"}


@dataclass(frozen=True)
class Layout:
    """Static mission geometry an agent learns from the mission brief."""

    width: int
    height: int
    tick_rate_hz: int
    time_limit_s: float
    reach_radius: float
    move_speed_cells_s: float
    crafting_table: Cell
    chest: Cell
    pickaxe_wood_cost: int
    inventory_capacity: int
    layers: tuple[tuple[str, tuple[Cell, ...]], ...]
    towers: tuple[tuple[str, tuple[Cell, ...]], ...]
    initial_blocks: tuple[tuple[Cell, dict], ...]

    @classmethod
    def from_config(cls, config: MissionConfig) -> "Layout":
        world = init_world(config)
        return cls(
            width=config.width,
            height=config.height,
            tick_rate_hz=config.tick_rate_hz,
            time_limit_s=config.time_limit_s,
            reach_radius=config.reach_radius,
            move_speed_cells_s=config.move_speed_cells_s,
            crafting_table=config.crafting_table,
            chest=config.chest,
            pickaxe_wood_cost=config.pickaxe_wood_cost,
            inventory_capacity=config.inventory_capacity,
            layers=tuple((l.material, tuple(l.cells)) for l in config.plan.layers),
            towers=tuple((t.material, tuple(t.cells)) for t in config.towers),
            initial_blocks=tuple(
                (cell, world.grid[cell].to_dict()) for cell in sorted(world.grid)
            ),
        )

    @classmethod
    def from_brief(cls, brief: P.MissionBrief) -> "Layout":
        view = brief.layout
        layers: dict[int, list] = {}
        materials: dict[int, str] = {}
        for pc in view.plan:
            layers.setdefault(pc.layer, []).append(tuple(pc.cell))
            materials[pc.layer] = pc.material
        return cls(
            width=view.width,
            height=view.height,
            tick_rate_hz=view.tick_rate_hz,
            time_limit_s=view.time_limit_s,
            reach_radius=view.reach_radius,
            move_speed_cells_s=view.move_speed_cells_s,
            crafting_table=tuple(view.crafting_table),
            chest=tuple(view.chest),
            pickaxe_wood_cost=view.pickaxe_wood_cost,
            inventory_capacity=view.inventory_capacity,
            layers=tuple(
                (materials[i], tuple(layers[i])) for i in sorted(layers)
            ),
            towers=tuple((t.material, tuple(tuple(c) for c in t.cells)) for t in view.towers),
            initial_blocks=tuple(
                (tuple(bc.cell), bc.block.model_dump(exclude_none=True))
                for bc in view.blocks
            ),
        )

    # -- plan geometry -------------------------------------------------

    def plan_cells(self) -> dict[Cell, str]:
        return {c: m for m, cells in self.layers for c in cells}

    def plan_centroid(self) -> tuple[float, float]:
        cells = [c for _, cs in self.layers for c in cs]
        n = len(cells)
        return (
            sum(c[0] + 0.5 for c in cells) / n,
            sum(c[1] + 0.5 for c in cells) / n,
        )

    def tower_materials(self) -> list[str]:
        return sorted({m for m, _ in self.towers})

    def tower_cells(self, material: str) -> list[Cell]:
        return [c for m, cells in self.towers if m == material for c in cells]

    def tower_material_at(self, cell: Cell) -> str | None:
        for material, cells in self.towers:
            if cell in cells:
                return material
        return None


@dataclass
class Observation:
    """One broadcast's worth of world knowledge, ready for decisions."""

    self_id: str
    agents: dict[str, P.AgentView]
    completion: float
    clock: float
    phase: int
    chest: dict[str, int]
    blocks: dict[Cell, dict]
    layout: Layout
    human_speed: float = 0.0

    def self_view(self) -> P.AgentView:
        return self.agents[self.self_id]

    def human_id(self) -> str | None:
        humans = sorted(a for a, v in self.agents.items() if v.kind == "human")
        return humans[0] if humans else None

    def human_view(self) -> P.AgentView | None:
        hid = self.human_id()
        return self.agents[hid] if hid else None

    def human_position(self) -> tuple[float, float] | None:
        view = self.human_view()
        return view.position if view else None

    def block(self, cell: Cell) -> dict:
        return self.blocks.get(tuple(cell), GROUND_BLOCK)

    def nav_grid(self) -> NavGrid:
        blocked = frozenset(
            cell for cell, block in self.blocks.items() if block["kind"] in SOLID_KINDS
        )
        return NavGrid(self.layout.width, self.layout.height, blocked)

    def carrying(self, material: str | None = None) -> int:
        counts = self.self_view().inventory.counts
        if material is None:
            return sum(counts.values())
        return counts.get(material, 0)

    # -- task progress -------------------------------------------------

    def unfilled_layer_cells(self, layer_index: int) -> list[Cell]:
        _, cells = self.layout.layers[layer_index]
        remaining = [c for c in cells if self.block(c)["kind"] != PLACED]
        return sorted(remaining, key=lambda c: (c[1], c[0]))  # row-major

    def current_layer(self) -> int | None:
        for i in range(len(self.layout.layers)):
            if self.unfilled_layer_cells(i):
                return i
        return None

    def unfilled_count(self, material: str) -> int:
        return sum(
            1
            for m, cells in self.layout.layers
            if m == material
            for c in cells
            if self.block(c)["kind"] != PLACED
        )

    def outstanding_need(self, material: str) -> int:
        """Unfilled plan cells of a material net of chest stock and carried units."""
        held = sum(v.inventory.counts.get(material, 0) for v in self.agents.values())
        return self.unfilled_count(material) - self.chest.get(material, 0) - held

    def needed_materials(self) -> list[str]:
        """Materials with outstanding need, in plan layer order."""
        out = []
        for material, _ in self.layout.layers:
            if material not in out and self.outstanding_need(material) > 0:
                out.append(material)
        return out

    def stocked_tower_cells(self, material: str) -> list[Cell]:
        return [
            c
            for c in self.layout.tower_cells(material)
            if self.block(c)["kind"] == TOWER and self.block(c).get("remaining", 0) > 0
        ]


def distance_to_cell(position: tuple[float, float], cell: Cell) -> float:
    return math.hypot(position[0] - (cell[0] + 0.5), position[1] - (cell[1] + 0.5))


class ObservationTracker:
    """Folds the brief and the broadcast stream into Observations."""

    def __init__(self, agent_id: str, layout: Layout):
        self.agent_id = agent_id
        self.layout = layout
        self.blocks: dict[Cell, dict] = {
            tuple(cell): dict(block) for cell, block in layout.initial_blocks
        }
        self._last_human: tuple[float, tuple[float, float]] | None = None

    def build(self, update: P.StateUpdate) -> Observation:
        for change in update.world.block_changes:
            self.blocks[tuple(change.cell)] = change.block.model_dump(exclude_none=True)

        speed = 0.0
        human = sorted(a for a, v in update.agents.items() if v.kind == "human")
        if human:
            pos = update.agents[human[0]].position
            clock = update.world.clock
            if self._last_human is not None:
                last_clock, last_pos = self._last_human
                dt = clock - last_clock
                if dt > 0:
                    speed = math.hypot(pos[0] - last_pos[0], pos[1] - last_pos[1]) / dt
            self._last_human = (clock, pos)

        return Observation(
            self_id=self.agent_id,
            agents=dict(update.agents),
            completion=update.world.completion,
            clock=update.world.clock,
            phase=update.world.phase,
            chest=dict(update.world.chest),
            blocks=dict(self.blocks),
            layout=self.layout,
            human_speed=speed,
        )
