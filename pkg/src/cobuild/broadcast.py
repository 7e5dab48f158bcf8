"""Builders that project WorldState into protocol views.

Used by both the live server (over WebSocket) and the headless episode
harness (in-process), so wire clients and scripted runs observe exactly the
same payloads.
"""

from __future__ import annotations

from . import protocol as P
from . import world as W
from .config import Cell, MissionConfig
from .phase import current_phase


def block_view(block: W.Block) -> P.BlockView:
    return P.BlockView(
        kind=block.kind,
        material=block.material,
        remaining=block.remaining if block.kind == W.TOWER else None,
        by=block.placed_by,
    )


def agent_view(agent: W.AgentState) -> P.AgentView:
    return P.AgentView(
        kind=agent.kind,
        position=(agent.position.x, agent.position.y),
        inventory=P.InventoryView(
            counts={m: c for m, c in sorted(agent.inventory.counts.items()) if c > 0},
            tools=tuple(sorted(agent.inventory.tools)),
        ),
        held_item=agent.held_item,
        looking_at=agent.looking_at,
        behavior_state=agent.behavior_state,
        can_place=agent.can_place,
    )


def state_update(world: W.WorldState, changed_cells: list[Cell] | None = None) -> P.StateUpdate:
    completion = W.completion_score(world)
    cells = changed_cells if changed_cells is not None else world.changed_cells
    changes = tuple(
        P.BlockChange(cell=cell, block=block_view(world.block_at(cell)))
        for cell in dict.fromkeys(cells)  # dedupe, keep order
    )
    return P.StateUpdate(
        agents={aid: agent_view(a) for aid, a in sorted(world.agents.items())},
        world=P.WorldView(
            completion=completion,
            clock=world.clock_s,
            phase=current_phase(completion, world.config.phase_thresholds),
            chest={m: c for m, c in sorted(world.chest_store.items()) if c > 0},
            block_changes=changes,
        ),
    )


def layout_view(config: MissionConfig) -> P.LayoutView:
    world = W.init_world(config)
    plan = tuple(
        P.PlanCellView(cell=cell, material=material, layer=config.plan.layer_index(cell))
        for cell, material in sorted(config.plan.cells.items())
    )
    return P.LayoutView(
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
        plan=plan,
        towers=tuple(
            P.TowerView(material=t.material, cells=tuple(t.cells)) for t in config.towers
        ),
        blocks=tuple(
            P.BlockChange(cell=cell, block=block_view(world.grid[cell]))
            for cell in sorted(world.grid)
        ),
    )


def mission_brief(
    world: W.WorldState, mission_id: str
) -> P.MissionBrief:
    return P.MissionBrief(
        mission_id=mission_id,
        config_digest=world.config.digest(),
        layout=layout_view(world.config),
        roster=tuple(
            P.RosterEntry(id=aid, kind=a.kind, can_place=a.can_place)
            for aid, a in sorted(world.agents.items())
        ),
    )
