"""Mission configuration: world geometry, task fixtures, pacing, validation.

Configs are plain data.  They load from a TOML file, round-trip through
``to_dict``/``config_from_dict`` (the dict form is embedded in timeline
headers so a recorded mission is self-contained), and hash to a stable
``digest`` used to tie logs to the exact configuration that produced them.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from importlib import resources

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from .errors import ConfigError
from .phase import PhaseThresholds

Cell = tuple[int, int]

DEFAULT_MINE_DURATIONS = {"wood": 2.5, "stone": 16.0, "brick": 16.0}


def _as_cell(value) -> Cell:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, int) and not isinstance(v, bool) for v in value)
    ):
        raise ConfigError(detail=f"not a cell coordinate: {value!r}")
    return (value[0], value[1])


@dataclass(frozen=True)
class PlanLayer:
    material: str
    cells: tuple[Cell, ...]


@dataclass
class FloorPlan:
    """Required material per ground cell, grouped into ordered single-material layers."""

    layers: tuple[PlanLayer, ...]

    def __post_init__(self):
        self._cells: dict[Cell, str] = {}
        self._layer_index: dict[Cell, int] = {}
        for i, layer in enumerate(self.layers):
            for cell in layer.cells:
                if cell in self._cells:
                    raise ConfigError(detail=f"plan cell listed twice: {cell}")
                self._cells[cell] = layer.material
                self._layer_index[cell] = i

    @property
    def cells(self) -> dict[Cell, str]:
        return self._cells

    def layer_index(self, cell: Cell) -> int:
        return self._layer_index[cell]

    def material_counts(self) -> dict[str, int]:
        counts: dict[str, int] = {}
        for layer in self.layers:
            counts[layer.material] = counts.get(layer.material, 0) + len(layer.cells)
        return counts

    def total_cells(self) -> int:
        return len(self._cells)


@dataclass(frozen=True)
class Tower:
    material: str
    cells: tuple[Cell, ...]
    stock_per_cell: int


@dataclass
class MissionConfig:
    plan: FloorPlan
    towers: tuple[Tower, ...]
    crafting_table: Cell
    chest: Cell
    spawn_human: Cell
    spawn_ai: Cell
    width: int = 16
    height: int = 12
    seed: int = 0
    tick_rate_hz: int = 20
    time_limit_s: float = 90.0
    move_speed_cells_s: float = 3.5
    reach_radius: float = 1.5
    mine_durations_s: dict[str, float] = field(
        default_factory=lambda: dict(DEFAULT_MINE_DURATIONS)
    )
    pickaxe_speedup: float = 2.5
    pickaxe_wood_cost: int = 3
    inventory_capacity: int = 64
    chest_capacity: int = 512
    # 0 disables the two-gatherer necessity check (unit-test fixtures do this).
    collaboration_multiplier: float = 0.0
    phase_thresholds: PhaseThresholds = field(default_factory=PhaseThresholds)

    # -- derived helpers ---------------------------------------------------

    @property
    def dt(self) -> float:
        return 1.0 / self.tick_rate_hz

    def materials(self) -> list[str]:
        seen = dict.fromkeys(self.plan.cells.values())
        for tower in self.towers:
            seen.setdefault(tower.material)
        return list(seen)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def mining_ticks(self, material: str, has_pickaxe: bool) -> int:
        duration = self.mine_durations_s[material]
        if has_pickaxe:
            duration /= self.pickaxe_speedup
        return max(1, round(duration * self.tick_rate_hz))

    def tower_stock(self, material: str) -> int:
        return sum(
            len(t.cells) * t.stock_per_cell for t in self.towers if t.material == material
        )

    # -- validation --------------------------------------------------------

    def validate(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ConfigError(detail="world dimensions must be positive")
        if self.tick_rate_hz <= 0:
            raise ConfigError(detail="tick_rate_hz must be positive")
        if self.time_limit_s <= 0:
            raise ConfigError(detail="time_limit_s must be positive")
        if self.move_speed_cells_s <= 0 or self.reach_radius <= 0:
            raise ConfigError(detail="movement parameters must be positive")
        if self.pickaxe_speedup < 1.0:
            raise ConfigError(detail="pickaxe_speedup must be >= 1")
        if self.plan.total_cells() == 0:
            raise ConfigError(detail="floor plan is empty")

        occupied: dict[Cell, str] = {}

        def claim(cell: Cell, what: str, *, may_share_walkable: bool = False) -> None:
            if not self.in_bounds(cell):
                raise ConfigError(detail=f"{what} at {cell} is out of bounds")
            if cell in occupied and not may_share_walkable:
                raise ConfigError(
                    detail=f"{what} at {cell} overlaps {occupied[cell]}"
                )
            occupied.setdefault(cell, what)

        for cell in self.plan.cells:
            claim(cell, "plan cell")
        for tower in self.towers:
            if tower.stock_per_cell <= 0:
                raise ConfigError(detail=f"{tower.material} tower has no stock")
            for cell in tower.cells:
                claim(cell, f"{tower.material} tower")
        claim(self.crafting_table, "crafting table")
        claim(self.chest, "chest")
        for spawn in (self.spawn_human, self.spawn_ai):
            if not self.in_bounds(spawn):
                raise ConfigError(detail=f"spawn {spawn} is out of bounds")
            if spawn in occupied:
                raise ConfigError(detail=f"spawn {spawn} overlaps {occupied[spawn]}")

        for material in self.plan.cells.values():
            if material not in self.mine_durations_s:
                raise ConfigError(detail=f"no mining duration for {material!r}")
            if not any(t.material == material for t in self.towers):
                raise ConfigError(detail=f"no tower supplies {material!r}")
            needed = self.plan.material_counts()[material]
            if material == "wood":
                needed += self.pickaxe_wood_cost  # at least one pickaxe must be craftable
            if self.tower_stock(material) < needed:
                raise ConfigError(detail=f"towers hold too little {material!r}")

        if self.collaboration_multiplier > 0:
            self._validate_collaboration()

    def _validate_collaboration(self) -> None:
        """The plan must be unwinnable alone yet fit two gatherers with headroom.

        Uses a walk-free lower bound on sustained mining time: even a solo
        agent that never walks cannot beat ``solo_floor``, while two agents
        splitting the plan (each crafting a pickaxe) need ``pair_floor``.
        """
        counts = self.plan.material_counts()
        total_base = sum(self.mine_durations_s[m] * n for m, n in counts.items())
        bootstrap = self.pickaxe_wood_cost * self.mine_durations_s.get("wood", 0.0)
        solo_floor = min(total_base, bootstrap + total_base / self.pickaxe_speedup)
        pair_floor = bootstrap + total_base / self.pickaxe_speedup / 2
        if solo_floor <= self.time_limit_s:
            raise ConfigError(
                detail=(
                    f"solo mining floor {solo_floor:.1f}s fits inside the "
                    f"{self.time_limit_s:.0f}s limit; task does not require collaboration"
                )
            )
        if pair_floor * self.collaboration_multiplier > self.time_limit_s:
            raise ConfigError(
                detail=(
                    f"paired mining floor {pair_floor:.1f}s leaves no headroom "
                    f"(multiplier {self.collaboration_multiplier})"
                )
            )

    # -- serialization -----------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "world": {
                "width": self.width,
                "height": self.height,
                "seed": self.seed,
                "tick_rate_hz": self.tick_rate_hz,
                "time_limit_s": self.time_limit_s,
            },
            "movement": {
                "speed_cells_s": self.move_speed_cells_s,
                "reach_radius": self.reach_radius,
            },
            "mining": {
                "durations_s": dict(sorted(self.mine_durations_s.items())),
                "pickaxe_speedup": self.pickaxe_speedup,
            },
            "crafting": {"pickaxe_wood_cost": self.pickaxe_wood_cost},
            "storage": {
                "inventory_capacity": self.inventory_capacity,
                "chest_capacity": self.chest_capacity,
            },
            "collaboration": {"required_multiplier": self.collaboration_multiplier},
            "phases": {"thresholds": list(self.phase_thresholds.values)},
            "fixtures": {
                "crafting_table": list(self.crafting_table),
                "chest": list(self.chest),
                "spawn_human": list(self.spawn_human),
                "spawn_ai": list(self.spawn_ai),
            },
            "towers": [
                {
                    "material": t.material,
                    "cells": [list(c) for c in t.cells],
                    "stock_per_cell": t.stock_per_cell,
                }
                for t in self.towers
            ],
            "plan": {
                "layers": [
                    {"material": l.material, "cells": [list(c) for c in l.cells]}
                    for l in self.plan.layers
                ]
            },
        }

    def digest(self) -> str:
        canonical = json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))
        return "sha256:" + hashlib.sha256(canonical.encode()).hexdigest()


def config_from_dict(data: dict) -> MissionConfig:
    try:
        world = data.get("world", {})
        movement = data.get("movement", {})
        mining = data.get("mining", {})
        crafting = data.get("crafting", {})
        storage = data.get("storage", {})
        collab = data.get("collaboration", {})
        phases = data.get("phases", {})
        fixtures = data["fixtures"]
        plan = FloorPlan(
            layers=tuple(
                PlanLayer(
                    material=str(layer["material"]),
                    cells=tuple(_as_cell(c) for c in layer["cells"]),
                )
                for layer in data["plan"]["layers"]
            )
        )
        towers = tuple(
            Tower(
                material=str(t["material"]),
                cells=tuple(_as_cell(c) for c in t["cells"]),
                stock_per_cell=int(t["stock_per_cell"]),
            )
            for t in data.get("towers", [])
        )
        config = MissionConfig(
            plan=plan,
            towers=towers,
            crafting_table=_as_cell(fixtures["crafting_table"]),
            chest=_as_cell(fixtures["chest"]),
            spawn_human=_as_cell(fixtures["spawn_human"]),
            spawn_ai=_as_cell(fixtures["spawn_ai"]),
            width=int(world.get("width", 16)),
            height=int(world.get("height", 12)),
            seed=int(world.get("seed", 0)),
            tick_rate_hz=int(world.get("tick_rate_hz", 20)),
            time_limit_s=float(world.get("time_limit_s", 90.0)),
            move_speed_cells_s=float(movement.get("speed_cells_s", 3.5)),
            reach_radius=float(movement.get("reach_radius", 1.5)),
            mine_durations_s={
                str(k): float(v)
                for k, v in mining.get("durations_s", DEFAULT_MINE_DURATIONS).items()
            },
            pickaxe_speedup=float(mining.get("pickaxe_speedup", 2.5)),
            pickaxe_wood_cost=int(crafting.get("pickaxe_wood_cost", 3)),
            inventory_capacity=int(storage.get("inventory_capacity", 64)),
            chest_capacity=int(storage.get("chest_capacity", 512)),
            collaboration_multiplier=float(collab.get("required_multiplier", 0.0)),
            phase_thresholds=PhaseThresholds(
                tuple(float(t) for t in phases.get("thresholds", (0.2, 0.4, 0.6, 0.8)))
            ),
        )
    except ConfigError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(detail=f"bad config structure: {exc}") from exc
    config.validate()
    return config


def load_config(path, *, seed: int | None = None) -> MissionConfig:
    """Load and validate a TOML mission config; ``seed`` overrides the file's."""
    with open(path, "rb") as fh:
        data = tomllib.load(fh)
    if seed is not None:
        data.setdefault("world", {})["seed"] = seed
    return config_from_dict(data)


def default_config(*, seed: int | None = None) -> MissionConfig:
    """The packaged desk-scale house mission."""
    ref = resources.files("cobuild").joinpath("configs/default.toml")
    data = tomllib.loads(ref.read_text())
    if seed is not None:
        data.setdefault("world", {})["seed"] = seed
    return config_from_dict(data)
