"""Teammate behavior inference from streamed position and observable state.

The table below is ordered; the first matching row labels the activity.  It
works from what an onlooker could see — where the human stands, what block
they face, what they hold, how fast they move — never from the simulator's
own ground-truth label.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from . import protocol as P
from .agents.observation import Layout, distance_to_cell
from .world import AT_CHEST, BUILDING, CRAFTING, IDLE, PICKAXE, TRAVELING, gathering

INFERENCE_RADIUS = 2.0
_SPEED_EPSILON = 1e-6

PLAN_CENTROID = "plan_centroid"


@dataclass(frozen=True)
class HumanInference:
    activity: str
    proximity: dict[str, float]  # landmark name -> distance in cells


def landmark_distances(position: tuple[float, float], layout: Layout) -> dict[str, float]:
    out: dict[str, float] = {}
    for material in layout.tower_materials():
        out[f"tower:{material}"] = min(
            distance_to_cell(position, c) for c in layout.tower_cells(material)
        )
    out["crafting_table"] = distance_to_cell(position, layout.crafting_table)
    out["chest"] = distance_to_cell(position, layout.chest)
    cx, cy = layout.plan_centroid()
    out[PLAN_CENTROID] = math.hypot(position[0] - cx, position[1] - cy)
    return out


def infer_human_behavior(
    human: P.AgentView, layout: Layout, speed: float = 0.0
) -> HumanInference:
    position = human.position
    proximity = landmark_distances(position, layout)
    looking = tuple(human.looking_at) if human.looking_at else None

    activity = None

    # 1. Near a tower and facing one of its blocks: gathering that material.
    if looking is not None:
        material = layout.tower_material_at(looking)
        if material is not None and proximity[f"tower:{material}"] <= INFERENCE_RADIUS:
            activity = gathering(material)

    # 2. Near the crafting table and facing it.
    if activity is None and looking == tuple(layout.crafting_table):
        if proximity["crafting_table"] <= INFERENCE_RADIUS:
            activity = CRAFTING

    # 3. On or beside a plan cell while holding a material: building.
    if activity is None and human.held_item not in (None, PICKAXE):
        cell = (math.floor(position[0]), math.floor(position[1]))
        plan = layout.plan_cells()
        near_plan = any(
            (cell[0] + dx, cell[1] + dy) in plan
            for dx, dy in ((0, 0), (0, -1), (1, 0), (0, 1), (-1, 0))
        )
        if near_plan:
            activity = BUILDING

    # 4. Near the chest.
    if activity is None and proximity["chest"] <= INFERENCE_RADIUS:
        activity = AT_CHEST

    # 5. Moving anywhere else.
    if activity is None and speed > _SPEED_EPSILON:
        activity = TRAVELING

    return HumanInference(activity=activity or IDLE, proximity=proximity)
