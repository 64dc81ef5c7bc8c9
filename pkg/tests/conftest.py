from __future__ import annotations

import numpy as np
import pytest

from flowplan import GridMap
from flowplan.oracle import bfs_distance


def random_map(rng: np.random.Generator, rows: int, cols: int, density: float) -> GridMap:
    mask = (rng.random((rows, cols)) < density).astype(np.uint8)
    return GridMap.from_mask(mask)


def free_cells(grid: GridMap) -> list[tuple[int, int]]:
    return [tuple(int(v) for v in c) for c in np.argwhere(grid.mask == 0)]


def feasible_instance(
    rng: np.random.Generator,
    rows: int,
    cols: int,
    density: float = 0.2,
    min_distance: int = 1,
):
    """A random (grid, start, goal, bfs) tuple with a reachable goal."""
    while True:
        grid = random_map(rng, rows, cols, density)
        free = free_cells(grid)
        if len(free) < 2:
            continue
        start = free[rng.integers(len(free))]
        goal = free[rng.integers(len(free))]
        if goal == start:
            continue
        d = bfs_distance(grid, start, [goal])
        if d is not None and d >= min_distance:
            return grid, start, goal, d


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240817)
