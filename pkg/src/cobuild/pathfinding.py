"""A* grid path planning over 4-connected unit-cost cells.

Determinism contract: neighbors expand in N, E, S, W order and heap ties break
on lexicographic (x, y), so live runs and replays compute identical paths.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass

from .config import Cell
from .errors import CobuildError

NEIGHBOR_OFFSETS = ((0, -1), (1, 0), (0, 1), (-1, 0))  # N, E, S, W


class Unreachable(CobuildError):
    default_code = "unreachable"


class InvalidEndpoint(CobuildError):
    default_code = "invalid-endpoint"


@dataclass(frozen=True)
class NavGrid:
    width: int
    height: int
    blocked: frozenset[Cell]

    @classmethod
    def from_world(cls, world) -> "NavGrid":
        blocked = frozenset(
            cell for cell, block in world.grid.items() if block.solid
        )
        return cls(world.config.width, world.config.height, blocked)

    def in_bounds(self, cell: Cell) -> bool:
        return 0 <= cell[0] < self.width and 0 <= cell[1] < self.height

    def walkable(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and cell not in self.blocked

    def neighbors(self, cell: Cell):
        x, y = cell
        for dx, dy in NEIGHBOR_OFFSETS:
            nxt = (x + dx, y + dy)
            if self.walkable(nxt):
                yield nxt


def _manhattan(a: Cell, goals: frozenset[Cell]) -> int:
    return min(abs(a[0] - g[0]) + abs(a[1] - g[1]) for g in goals)


def plan_path(
    grid: NavGrid, start: Cell, goal: Cell, *, adjacent_to_goal: bool = False
) -> list[Cell]:
    """Minimum-length path from start to goal inclusive.

    With ``adjacent_to_goal`` the goal may be a solid cell; the path then ends
    at its best walkable 4-neighbor (how agents approach blocks they operate
    on).  Raises ``Unreachable`` when no path exists and ``InvalidEndpoint``
    for out-of-bounds endpoints or a blocked start.
    """
    start = tuple(start)
    goal = tuple(goal)
    if not grid.in_bounds(start) or not grid.in_bounds(goal):
        raise InvalidEndpoint(detail=f"{start} -> {goal}")
    if not grid.walkable(start):
        raise InvalidEndpoint(detail=f"start {start} is blocked")

    if adjacent_to_goal and not grid.walkable(goal):
        goals = frozenset(
            (goal[0] + dx, goal[1] + dy)
            for dx, dy in NEIGHBOR_OFFSETS
            if grid.walkable((goal[0] + dx, goal[1] + dy))
        )
        if not goals:
            raise Unreachable(detail=f"no walkable neighbor of {goal}")
    else:
        if not grid.walkable(goal):
            raise Unreachable(detail=f"goal {goal} is blocked")
        goals = frozenset({goal})

    if start in goals:
        return [start]

    # Heap entries: (f, cell) — lexicographic cell order breaks f ties.
    open_heap: list[tuple[int, Cell]] = [(_manhattan(start, goals), start)]
    g_score: dict[Cell, int] = {start: 0}
    came_from: dict[Cell, Cell] = {}
    done: set[Cell] = set()

    while open_heap:
        _, current = heapq.heappop(open_heap)
        if current in done:
            continue
        done.add(current)
        if current in goals:
            path = [current]
            while current in came_from:
                current = came_from[current]
                path.append(current)
            path.reverse()
            return path
        g_here = g_score[current]
        for nxt in grid.neighbors(current):
            tentative = g_here + 1
            if tentative < g_score.get(nxt, 1 << 30):
                g_score[nxt] = tentative
                came_from[nxt] = current
                heapq.heappush(open_heap, (tentative + _manhattan(nxt, goals), nxt))

    raise Unreachable(detail=f"{start} -> {goal}")
