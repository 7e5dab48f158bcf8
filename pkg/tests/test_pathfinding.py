"""A* planner checked against an independent breadth-first-search oracle."""

import random
from collections import deque

import pytest

from cobuild.pathfinding import InvalidEndpoint, NavGrid, Unreachable, plan_path


def bfs_shortest_length(grid: NavGrid, start, goal):
    """Oracle: BFS shortest path length in edges, or None if unreachable."""
    if not grid.walkable(goal):
        return None
    seen = {start}
    queue = deque([(start, 0)])
    while queue:
        cell, dist = queue.popleft()
        if cell == goal:
            return dist
        x, y = cell
        for nxt in ((x, y - 1), (x + 1, y), (x, y + 1), (x - 1, y)):
            if grid.walkable(nxt) and nxt not in seen:
                seen.add(nxt)
                queue.append((nxt, dist + 1))
    return None


def random_grid(rng, size=16, obstacle_rate=0.2):
    blocked = frozenset(
        (x, y)
        for x in range(size)
        for y in range(size)
        if rng.random() < obstacle_rate
    )
    return NavGrid(size, size, blocked)


def assert_valid_path(grid, path, start, goal_cells):
    assert path[0] == start
    assert path[-1] in goal_cells
    for cell in path:
        assert grid.walkable(cell)
    for a, b in zip(path, path[1:]):
        assert abs(a[0] - b[0]) + abs(a[1] - b[1]) == 1


def test_start_equals_goal():
    grid = NavGrid(4, 4, frozenset())
    assert plan_path(grid, (2, 2), (2, 2)) == [(2, 2)]


def test_enclosed_goal_unreachable():
    walls = frozenset({(4, 3), (4, 5), (3, 4), (5, 4)})
    grid = NavGrid(8, 8, walls)
    with pytest.raises(Unreachable):
        plan_path(grid, (0, 0), (4, 4))


def test_blocked_start_invalid():
    grid = NavGrid(4, 4, frozenset({(1, 1)}))
    with pytest.raises(InvalidEndpoint):
        plan_path(grid, (1, 1), (3, 3))


def test_out_of_bounds_goal_invalid():
    grid = NavGrid(4, 4, frozenset())
    with pytest.raises(InvalidEndpoint):
        plan_path(grid, (0, 0), (9, 9))


def test_adjacent_mode_reaches_neighbor_of_solid_goal():
    grid = NavGrid(6, 6, frozenset({(3, 3)}))
    path = plan_path(grid, (0, 3), (3, 3), adjacent_to_goal=True)
    assert path[-1] in {(3, 2), (4, 3), (3, 4), (2, 3)}
    assert len(path) - 1 == 2  # shortest approach: (0,3)->(1,3)->(2,3)


def test_deterministic_tie_break():
    grid = NavGrid(8, 8, frozenset())
    first = plan_path(grid, (1, 1), (5, 5))
    for _ in range(5):
        assert plan_path(grid, (1, 1), (5, 5)) == first


def test_matches_bfs_oracle_on_200_random_grids():
    rng = random.Random(1234)
    solved = 0
    for _ in range(200):
        grid = random_grid(rng)
        start = (rng.randrange(16), rng.randrange(16))
        goal = (rng.randrange(16), rng.randrange(16))
        if not grid.walkable(start):
            continue
        oracle = bfs_shortest_length(grid, start, goal)
        if oracle is None:
            with pytest.raises(Unreachable):
                plan_path(grid, start, goal)
        else:
            path = plan_path(grid, start, goal)
            assert_valid_path(grid, path, start, {goal})
            assert len(path) - 1 == oracle
            solved += 1
    assert solved > 50  # the sample actually exercised the planner
