"""Authoritative tick-driven simulation of the collaborative house-building task.

The world is a 2-D voxel grid (one block per cell) plus continuous agent
positions.  Time is counted in integer ticks; all published timestamps are
``tick / tick_rate_hz`` so clock arithmetic is exact and replayable.  Every
mutating entry point returns a *new* ``WorldState`` — callers treat states as
immutable snapshots, which is what makes deterministic replay and cross-thread
handoff safe.

Action requests are duck-typed: anything with a ``type`` attribute and the
variant's fields (see ``cobuild.protocol``) can drive the world, so the
simulation core has no dependency on the wire layer.

Canonical serialization (``canonical_state`` / ``serialize_state``) covers the
replayable surface of a state: grid, stores, agent poses and labels, derived
completion/phase and the mission outcome.  Transient motor state (mining
progress, walk targets) is deliberately excluded; it is re-derivable and never
consumed by replay, logging, or the review tooling.
"""

from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, field
from typing import Iterable, Mapping

from .config import Cell, MissionConfig
from .errors import WorldError
from .phase import current_phase

# Block kinds.
AIR = "air"
GROUND = "ground"
MARKER = "marker"
TOWER = "tower_block"
TABLE = "crafting_table"
CHEST = "chest"
PLACED = "placed"

SOLID_KINDS = frozenset({TOWER, TABLE, CHEST, PLACED})

# Agent kinds / mission status.
HUMAN = "human"
AI = "ai"
ONGOING = "ongoing"
SUCCESS = "success"
FAILURE = "failure"

PICKAXE = "pickaxe"

# A dig survives brief gaps between mine requests (network jitter for wire
# agents) but is abandoned after this many consecutive silent ticks.
MINING_GRACE_TICKS = 6

# Behavior-state labels streamed to clients and logged per agent.
IDLE = "idle"
TRAVELING = "traveling"
CRAFTING = "crafting"
BUILDING = "building"
AT_CHEST = "at_chest"


def gathering(material: str) -> str:
    return f"gathering:{material}"


def gathering_material(label: str) -> str | None:
    """Material named by a ``gathering:<m>`` label, else None."""
    if label.startswith("gathering:"):
        return label.split(":", 1)[1]
    return None


@dataclass(slots=True)
class Block:
    kind: str
    material: str | None = None
    remaining: int = 0
    placed_by: str | None = None

    @property
    def solid(self) -> bool:
        return self.kind in SOLID_KINDS

    def clone(self) -> "Block":
        return Block(self.kind, self.material, self.remaining, self.placed_by)

    def to_dict(self) -> dict:
        out: dict = {"kind": self.kind}
        if self.material is not None:
            out["material"] = self.material
        if self.kind == TOWER:
            out["remaining"] = self.remaining
        if self.placed_by is not None:
            out["by"] = self.placed_by
        return out


@dataclass(slots=True)
class Position:
    x: float
    y: float

    def cell(self) -> Cell:
        return (math.floor(self.x), math.floor(self.y))

    def distance_to_cell(self, cell: Cell) -> float:
        return math.hypot(self.x - (cell[0] + 0.5), self.y - (cell[1] + 0.5))

    def clone(self) -> "Position":
        return Position(self.x, self.y)


def cell_center(cell: Cell) -> Position:
    return Position(cell[0] + 0.5, cell[1] + 0.5)


@dataclass(slots=True)
class Inventory:
    counts: dict[str, int] = field(default_factory=dict)
    tools: set[str] = field(default_factory=set)
    capacity: int = 64

    def total(self) -> int:
        return sum(self.counts.values())

    def count(self, material: str) -> int:
        return self.counts.get(material, 0)

    def add(self, material: str, n: int) -> None:
        if self.total() + n > self.capacity:
            raise WorldError("inventory-full", f"capacity {self.capacity} reached")
        self.counts[material] = self.counts.get(material, 0) + n

    def remove(self, material: str, n: int) -> None:
        have = self.counts.get(material, 0)
        if have < n:
            raise WorldError("insufficient-materials", f"{material}: have {have}, need {n}")
        if have == n:
            del self.counts[material]
        else:
            self.counts[material] = have - n

    def clone(self) -> "Inventory":
        return Inventory(dict(self.counts), set(self.tools), self.capacity)


@dataclass(slots=True)
class AgentState:
    id: str
    kind: str
    position: Position
    inventory: Inventory
    can_place: bool
    held_item: str | None = None
    looking_at: Cell | None = None
    behavior_state: str = IDLE
    # Motor state, excluded from canonical serialization.
    move_target: Cell | None = None
    mining_target: Cell | None = None
    mining_ticks: int = 0
    mining_quiet_ticks: int = 0
    heading: Cell = (0, 1)

    def clone(self) -> "AgentState":
        return AgentState(
            id=self.id,
            kind=self.kind,
            position=self.position.clone(),
            inventory=self.inventory.clone(),
            can_place=self.can_place,
            held_item=self.held_item,
            looking_at=self.looking_at,
            behavior_state=self.behavior_state,
            move_target=self.move_target,
            mining_target=self.mining_target,
            mining_ticks=self.mining_ticks,
            mining_quiet_ticks=self.mining_quiet_ticks,
            heading=self.heading,
        )


@dataclass(slots=True)
class MissionOutcome:
    status: str = ONGOING
    ended_at: float | None = None
    final_completion: float | None = None

    def clone(self) -> "MissionOutcome":
        return MissionOutcome(self.status, self.ended_at, self.final_completion)

    def to_dict(self) -> dict:
        return {
            "status": self.status,
            "ended_at": self.ended_at,
            "final_completion": self.final_completion,
        }


@dataclass(slots=True)
class Rejection:
    agent_id: str
    code: str
    detail: str


@dataclass
class WorldState:
    config: MissionConfig
    tick: int = 0
    agents: dict[str, AgentState] = field(default_factory=dict)
    grid: dict[Cell, Block] = field(default_factory=dict)
    chest_store: dict[str, int] = field(default_factory=dict)
    mission_started: bool = False
    started_tick: int = 0
    outcome: MissionOutcome = field(default_factory=MissionOutcome)
    # Per-step transients, not part of canonical state.
    rejections: list[Rejection] = field(default_factory=list)
    changed_cells: list[Cell] = field(default_factory=list)

    @property
    def clock_s(self) -> float:
        return (self.tick - self.started_tick) / self.config.tick_rate_hz

    def block_at(self, cell: Cell) -> Block:
        block = self.grid.get(cell)
        return block if block is not None else Block(GROUND)

    def is_walkable(self, cell: Cell) -> bool:
        return self.config.in_bounds(cell) and not self.block_at(cell).solid

    def clone(self) -> "WorldState":
        return WorldState(
            config=self.config,
            tick=self.tick,
            agents={aid: a.clone() for aid, a in self.agents.items()},
            grid={cell: b.clone() for cell, b in self.grid.items()},
            chest_store=dict(self.chest_store),
            mission_started=self.mission_started,
            started_tick=self.started_tick,
            outcome=self.outcome.clone(),
        )


# ---------------------------------------------------------------------------
# Construction and joining
# ---------------------------------------------------------------------------


def init_world(config: MissionConfig) -> WorldState:
    """Empty flat world populated with plan markers, towers, table and chest."""
    config.validate()
    world = WorldState(config=config)
    for cell, material in config.plan.cells.items():
        world.grid[cell] = Block(MARKER, material=material)
    for tower in config.towers:
        for cell in tower.cells:
            world.grid[cell] = Block(TOWER, material=tower.material, remaining=tower.stock_per_cell)
    world.grid[config.crafting_table] = Block(TABLE)
    world.grid[config.chest] = Block(CHEST)
    return world


def _spawn_cell(world: WorldState, agent_id: str, nominal: Cell) -> Cell:
    """Deterministic spawn jitter: seed and agent id pick a free cell near nominal."""
    plan = world.config.plan.cells
    candidates = []
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            cell = (nominal[0] + dx, nominal[1] + dy)
            if (
                world.is_walkable(cell)
                and cell not in plan
                and not any(a.position.cell() == cell for a in world.agents.values())
            ):
                candidates.append(cell)
    if not candidates:
        return nominal
    rng = random.Random(f"{world.config.seed}:{agent_id}")
    return rng.choice(sorted(candidates))


def join_agent(
    world: WorldState, agent_id: str, kind: str, can_place: bool | None = None
) -> WorldState:
    """Register an agent at its spawn; starts the mission clock once both kinds joined."""
    if kind not in (HUMAN, AI):
        raise WorldError("invalid-kind", f"unknown agent kind {kind!r}")
    if agent_id in world.agents:
        raise WorldError("duplicate-agent", f"agent {agent_id!r} already joined")
    new = world.clone()
    nominal = new.config.spawn_human if kind == HUMAN else new.config.spawn_ai
    cell = _spawn_cell(new, agent_id, nominal)
    new.agents[agent_id] = AgentState(
        id=agent_id,
        kind=kind,
        position=cell_center(cell),
        inventory=Inventory(capacity=new.config.inventory_capacity),
        can_place=(kind == HUMAN) if can_place is None else can_place,
    )
    kinds = {a.kind for a in new.agents.values()}
    if not new.mission_started and HUMAN in kinds and AI in kinds:
        new.mission_started = True
        new.started_tick = new.tick
    return new


# ---------------------------------------------------------------------------
# Scoring and termination
# ---------------------------------------------------------------------------


def completion_score(world: WorldState) -> float:
    """Fraction of plan cells correctly filled; placement rules make it monotone."""
    plan = world.config.plan.cells
    done = sum(1 for cell in plan if world.block_at(cell).kind == PLACED)
    return done / len(plan)


def check_termination(world: WorldState) -> MissionOutcome:
    if not world.mission_started:
        return MissionOutcome()
    if world.outcome.status != ONGOING:
        return world.outcome.clone()
    completion = completion_score(world)
    clock = world.clock_s
    limit = world.config.time_limit_s
    if completion >= 1.0 and clock <= limit:
        return MissionOutcome(SUCCESS, ended_at=clock, final_completion=1.0)
    if clock >= limit and completion < 1.0:
        return MissionOutcome(FAILURE, ended_at=limit, final_completion=completion)
    return MissionOutcome()


# ---------------------------------------------------------------------------
# Tick advance
# ---------------------------------------------------------------------------


def step(world: WorldState, actions: Mapping[str, object], dt: float) -> WorldState:
    """Advance one tick applying at most one action per agent (sorted by id)."""
    return step_ordered(world, sorted(actions.items()), dt)


def step_ordered(
    world: WorldState, actions: Iterable[tuple[str, object]], dt: float
) -> WorldState:
    """Advance one tick applying an already-ordered action request sequence."""
    actions = list(actions)
    for agent_id, _ in actions:
        if agent_id not in world.agents:
            raise WorldError("unknown-agent", agent_id)
    if abs(dt - world.config.dt) > 1e-9:
        raise WorldError("bad-dt", f"dt must be {world.config.dt}, got {dt}")
    if not world.mission_started or world.outcome.status != ONGOING:
        return world  # frozen outside the active mission window

    new = world.clone()
    intents: dict[str, tuple[str, Cell | None]] = {}
    for agent_id, action in actions:
        try:
            _apply_action(new, agent_id, action, intents)
        except WorldError as err:
            new.rejections.append(Rejection(agent_id, err.code, err.detail))

    _advance(new, dt, intents)
    new.tick += 1
    outcome = check_termination(new)
    if outcome.status != ONGOING:
        new.outcome = outcome
    return new


def _require(condition: bool, code: str, detail: str = "") -> None:
    if not condition:
        raise WorldError(code, detail)


def _in_reach(world: WorldState, agent: AgentState, cell: Cell) -> bool:
    return agent.position.distance_to_cell(cell) <= world.config.reach_radius


def _apply_action(
    world: WorldState, agent_id: str, action: object, intents: dict[str, tuple[str, Cell | None]]
) -> None:
    agent = world.agents[agent_id]
    kind = getattr(action, "type", None)

    if kind == "idle" or kind is None:
        agent.move_target = None
        agent.mining_target = None
        agent.mining_ticks = 0
        agent.looking_at = None

    elif kind == "move_to":
        target = tuple(action.target)
        _require(world.config.in_bounds(target), "out-of-bounds", f"{target}")
        _require(world.is_walkable(target), "not-walkable", f"{target}")
        agent.move_target = target
        agent.mining_target = None
        agent.mining_ticks = 0
        agent.looking_at = None

    elif kind == "mine":
        _mine_begin(world, agent, tuple(action.target))
        intents[agent_id] = ("mine", agent.mining_target)

    elif kind == "craft":
        _require(getattr(action, "item", PICKAXE) == PICKAXE, "unknown-recipe")
        _craft_pickaxe(world, agent)
        intents[agent_id] = ("craft", None)

    elif kind == "chest":
        _chest_transfer(
            world, agent, action.direction, action.material, int(action.n)
        )
        intents[agent_id] = ("chest", None)

    elif kind == "place":
        _place_block(world, agent, tuple(action.target), action.material)
        intents[agent_id] = ("place", None)

    else:
        raise WorldError("unknown-action", f"{kind!r}")


def _mine_begin(world: WorldState, agent: AgentState, target: Cell) -> None:
    block = world.block_at(target)
    _require(block.kind == TOWER and block.remaining > 0, "not-mineable", f"{target}")
    _require(_in_reach(world, agent, target), "out-of-reach", f"{target}")
    _require(
        agent.inventory.total() < agent.inventory.capacity,
        "inventory-full",
        f"capacity {agent.inventory.capacity}",
    )
    if agent.mining_target != target:
        agent.mining_target = target
        agent.mining_ticks = 0
    agent.mining_quiet_ticks = 0
    agent.move_target = None
    agent.looking_at = target
    if PICKAXE in agent.inventory.tools:
        agent.held_item = PICKAXE


def _craft_pickaxe(world: WorldState, agent: AgentState) -> None:
    _require(_in_reach(world, agent, world.config.crafting_table), "not-at-table")
    _require(PICKAXE not in agent.inventory.tools, "already-has-pickaxe")
    agent.inventory.remove("wood", world.config.pickaxe_wood_cost)
    agent.inventory.tools.add(PICKAXE)
    agent.held_item = PICKAXE
    agent.looking_at = world.config.crafting_table
    agent.behavior_state = CRAFTING
    agent.mining_target = None
    agent.mining_ticks = 0


def _chest_transfer(
    world: WorldState, agent: AgentState, direction: str, material: str, n: int
) -> None:
    _require(direction in ("deposit", "withdraw"), "unknown-action", direction)
    _require(n >= 0, "insufficient-materials", "negative amount")
    _require(_in_reach(world, agent, world.config.chest), "out-of-reach", "chest")
    if n > 0:
        if direction == "deposit":
            _require(
                sum(world.chest_store.values()) + n <= world.config.chest_capacity,
                "chest-full",
                f"capacity {world.config.chest_capacity}",
            )
            agent.inventory.remove(material, n)
            world.chest_store[material] = world.chest_store.get(material, 0) + n
            if agent.inventory.count(material) == 0 and agent.held_item == material:
                agent.held_item = None
        else:
            have = world.chest_store.get(material, 0)
            _require(have >= n, "insufficient-materials", f"chest has {have} {material}")
            agent.inventory.add(material, n)  # raises inventory-full before mutation
            if have == n:
                del world.chest_store[material]
            else:
                world.chest_store[material] = have - n
            agent.held_item = material
    agent.looking_at = world.config.chest
    agent.behavior_state = AT_CHEST
    agent.mining_target = None
    agent.mining_ticks = 0


def _place_block(world: WorldState, agent: AgentState, target: Cell, material: str) -> None:
    _require(agent.can_place, "capability-denied", "agent cannot place blocks")
    plan = world.config.plan.cells
    _require(target in plan, "not-in-plan", f"{target}")
    _require(plan[target] == material, "wrong-material", f"plan wants {plan[target]}")
    _require(agent.inventory.count(material) >= 1, "insufficient-materials", material)
    block = world.block_at(target)
    _require(block.kind in (MARKER, AIR), "occupied", f"{target} holds {block.kind}")
    _require(
        all(a.position.cell() != target for a in world.agents.values()),
        "occupied",
        f"agent standing on {target}",
    )
    agent.inventory.remove(material, 1)
    world.grid[target] = Block(PLACED, material=material, placed_by=agent.id)
    world.changed_cells.append(target)
    agent.held_item = material if agent.inventory.count(material) > 0 else None
    agent.looking_at = target
    agent.behavior_state = BUILDING
    agent.mining_target = None
    agent.mining_ticks = 0


_INSTANT_LABELS = {"craft": CRAFTING, "place": BUILDING, "chest": AT_CHEST}


def _advance(world: WorldState, dt: float, intents: dict[str, tuple[str, Cell | None]]) -> None:
    for agent_id in sorted(world.agents):
        agent = world.agents[agent_id]
        intent = intents.get(agent_id)
        label = None

        if intent is not None and intent[0] == "mine" and agent.mining_target == intent[1]:
            target = agent.mining_target
            block = world.block_at(target)
            if block.kind != TOWER:
                # Another agent consumed the block earlier this same tick.
                agent.mining_target = None
                agent.mining_ticks = 0
                agent.looking_at = None
            else:
                agent.mining_ticks += 1
                label = gathering(block.material)
                needed = world.config.mining_ticks(
                    block.material, PICKAXE in agent.inventory.tools
                )
                if agent.mining_ticks >= needed:
                    agent.inventory.add(block.material, 1)
                    block.remaining -= 1
                    if block.remaining <= 0:
                        world.grid[target] = Block(AIR)
                    world.changed_cells.append(target)
                    agent.mining_target = None
                    agent.mining_ticks = 0
                    if PICKAXE not in agent.inventory.tools:
                        agent.held_item = block.material
        elif agent.mining_target is not None and intent is None:
            # Sustain requirement with jitter tolerance: quiet ticks pause
            # progress, and the dig is abandoned once the grace runs out.
            agent.mining_quiet_ticks += 1
            if agent.mining_quiet_ticks > MINING_GRACE_TICKS:
                agent.mining_target = None
                agent.mining_ticks = 0
                agent.mining_quiet_ticks = 0
                agent.looking_at = None

        moved = False
        if agent.move_target is not None and agent.mining_target is None:
            center = cell_center(agent.move_target)
            dx = center.x - agent.position.x
            dy = center.y - agent.position.y
            dist = math.hypot(dx, dy)
            step_len = world.config.move_speed_cells_s * dt
            if dist <= step_len:
                agent.position = center
                agent.move_target = None
            else:
                agent.position.x += dx / dist * step_len
                agent.position.y += dy / dist * step_len
            if dist > 0:
                moved = True
                if abs(dx) >= abs(dy):
                    agent.heading = (1 if dx > 0 else -1, 0)
                else:
                    agent.heading = (0, 1 if dy > 0 else -1)

        if label is None:
            if intent is not None and intent[0] in _INSTANT_LABELS:
                label = _INSTANT_LABELS[intent[0]]
            elif moved:
                label = TRAVELING
            else:
                label = IDLE
        agent.behavior_state = label


# ---------------------------------------------------------------------------
# Single-operation entry points (copy-on-write wrappers over the tick helpers)
# ---------------------------------------------------------------------------


def _checked_agent(world: WorldState, agent_id: str) -> AgentState:
    if agent_id not in world.agents:
        raise WorldError("unknown-agent", agent_id)
    return world.agents[agent_id]


def mine_block(world: WorldState, agent_id: str, target: Cell) -> WorldState:
    """Apply one tick of sustained mining; the block pops once enough ticks accrue."""
    _checked_agent(world, agent_id)
    new = world.clone()
    agent = new.agents[agent_id]
    _mine_begin(new, agent, tuple(target))
    _advance_mining_once(new, agent)
    return new


def _advance_mining_once(world: WorldState, agent: AgentState) -> None:
    target = agent.mining_target
    block = world.block_at(target)
    agent.mining_ticks += 1
    agent.behavior_state = gathering(block.material)
    needed = world.config.mining_ticks(block.material, PICKAXE in agent.inventory.tools)
    if agent.mining_ticks >= needed:
        agent.inventory.add(block.material, 1)
        block.remaining -= 1
        if block.remaining <= 0:
            world.grid[target] = Block(AIR)
        world.changed_cells.append(target)
        agent.mining_target = None
        agent.mining_ticks = 0
        if PICKAXE not in agent.inventory.tools:
            agent.held_item = block.material


def craft_pickaxe(world: WorldState, agent_id: str) -> WorldState:
    _checked_agent(world, agent_id)
    new = world.clone()
    _craft_pickaxe(new, new.agents[agent_id])
    return new


def chest_transfer(
    world: WorldState, agent_id: str, direction: str, material: str, n: int
) -> WorldState:
    _checked_agent(world, agent_id)
    new = world.clone()
    _chest_transfer(new, new.agents[agent_id], direction, material, n)
    return new


def place_block(world: WorldState, agent_id: str, target: Cell, material: str) -> WorldState:
    _checked_agent(world, agent_id)
    new = world.clone()
    _place_block(new, new.agents[agent_id], tuple(target), material)
    outcome = check_termination(new)
    if outcome.status != ONGOING:
        new.outcome = outcome
    return new


# ---------------------------------------------------------------------------
# Canonical serialization
# ---------------------------------------------------------------------------


def canonical_state(world: WorldState) -> dict:
    """Replayable view of a state as a plain dict with deterministic ordering."""
    completion = completion_score(world)
    agents = {}
    for agent_id in sorted(world.agents):
        agent = world.agents[agent_id]
        agents[agent_id] = {
            "kind": agent.kind,
            "can_place": agent.can_place,
            "position": [agent.position.x, agent.position.y],
            "held_item": agent.held_item,
            "looking_at": list(agent.looking_at) if agent.looking_at else None,
            "activity": agent.behavior_state,
            "inventory": {
                "counts": {m: c for m, c in sorted(agent.inventory.counts.items()) if c > 0},
                "tools": sorted(agent.inventory.tools),
            },
        }
    blocks = [
        [list(cell), world.grid[cell].to_dict()] for cell in sorted(world.grid)
    ]
    return {
        "width": world.config.width,
        "height": world.config.height,
        "clock_s": world.clock_s,
        "completion": completion,
        "phase": current_phase(completion, world.config.phase_thresholds),
        "outcome": world.outcome.to_dict(),
        "agents": agents,
        "blocks": blocks,
        "chest": {m: c for m, c in sorted(world.chest_store.items()) if c > 0},
    }


def serialize_state(world: WorldState) -> str:
    return dump_canonical(canonical_state(world))


def dump_canonical(state: dict) -> str:
    return json.dumps(state, sort_keys=True, separators=(",", ":"))
