"""Grid maps, the 9-action alphabet, motion stencils, and obstacle-censored
transition kernels.

Coordinates are (row, col) with row 0 at the top, so "up" means row - 1.
Grid boundaries behave exactly like obstacles: any stencil mass that would
leave the map is censored away and the remainder renormalized.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, Mapping

import numpy as np

from .errors import KernelDegenerateError

Cell = tuple[int, int]

#: mass kept on the current cell by a directional mask, as a fraction of the
#: slack left once the main direction took its share
_STILL_FRACTION = 0.05

_SUM_TOL = 1e-12


@dataclass(frozen=True)
class Action:
    """One of the nine moves: stay put or step to an 8-neighbor."""

    index: int
    name: str
    dy: int
    dx: int

    @property
    def displacement(self) -> Cell:
        return (self.dy, self.dx)


ACTIONS: tuple[Action, ...] = (
    Action(0, "still", 0, 0),
    Action(1, "up", -1, 0),
    Action(2, "up-right", -1, 1),
    Action(3, "right", 0, 1),
    Action(4, "down-right", 1, 1),
    Action(5, "down", 1, 0),
    Action(6, "down-left", 1, -1),
    Action(7, "left", 0, -1),
    Action(8, "up-left", -1, -1),
)

STILL = ACTIONS[0]
N_ACTIONS = len(ACTIONS)

ACTION_BY_NAME = {a.name: a for a in ACTIONS}

# displacement lookup tables indexed by action
ACTION_DY = np.array([a.dy for a in ACTIONS])
ACTION_DX = np.array([a.dx for a in ACTIONS])


@dataclass(frozen=True, eq=False)
class GridMap:
    """N x M binary obstacle mask; 1 marks an obstacle, 0 a free cell."""

    rows: int
    cols: int
    mask: np.ndarray

    def __post_init__(self):
        if self.rows <= 0 or self.cols <= 0:
            raise ValueError("grid dimensions must be positive")
        mask = np.asarray(self.mask, dtype=np.uint8)
        if mask.shape != (self.rows, self.cols):
            raise ValueError(
                f"mask shape {mask.shape} != ({self.rows}, {self.cols})"
            )
        if not np.isin(mask, (0, 1)).all():
            raise ValueError("mask cells must be 0 or 1")
        mask.flags.writeable = False
        object.__setattr__(self, "mask", mask)

    @classmethod
    def empty(cls, rows: int, cols: int) -> "GridMap":
        return cls(rows, cols, np.zeros((rows, cols), dtype=np.uint8))

    @classmethod
    def from_mask(cls, mask) -> "GridMap":
        mask = np.asarray(mask)
        return cls(mask.shape[0], mask.shape[1], mask)

    @property
    def free(self) -> np.ndarray:
        """Boolean array, True on free cells."""
        return self.mask == 0

    def in_bounds(self, cell: Cell) -> bool:
        i, j = cell
        return 0 <= i < self.rows and 0 <= j < self.cols

    def is_free(self, cell: Cell) -> bool:
        return self.in_bounds(cell) and self.mask[cell] == 0

    def with_obstacles(self, cells: Iterable[Cell]) -> "GridMap":
        """A copy of this map with extra cells marked as obstacles."""
        mask = self.mask.copy()
        for cell in cells:
            if not self.in_bounds(cell):
                raise ValueError(f"obstacle {cell} out of bounds")
            mask[cell] = 1
        return GridMap(self.rows, self.cols, mask)

    def __eq__(self, other) -> bool:
        if not isinstance(other, GridMap):
            return NotImplemented
        return (
            self.rows == other.rows
            and self.cols == other.cols
            and np.array_equal(self.mask, other.mask)
        )

    __hash__ = None


def default_masks(sharpness: float = 0.8) -> dict[Action, np.ndarray]:
    """Obstacle-free 3x3 transition stencils, one per action.

    A directional mask puts ``sharpness`` on the intended cell, splits the
    rest over the two neighbors flanking it, and keeps a small residue on
    the current cell so censoring can never wipe a stencil out entirely
    (except in the deterministic ``sharpness == 1`` limit).  The still mask
    is a point mass on the current cell.
    """
    if not 0.0 < sharpness <= 1.0:
        raise ValueError(f"sharpness must be in (0, 1], got {sharpness}")
    residue = _STILL_FRACTION * (1.0 - sharpness)
    side = (1.0 - sharpness - residue) / 2.0

    masks: dict[Action, np.ndarray] = {}
    still = np.zeros((3, 3))
    still[1, 1] = 1.0
    masks[STILL] = still

    ring = ACTIONS[1:]
    for k, action in enumerate(ring):
        left = ring[(k - 1) % 8]
        right = ring[(k + 1) % 8]
        m = np.zeros((3, 3))
        m[1 + action.dy, 1 + action.dx] = sharpness
        m[1 + left.dy, 1 + left.dx] += side
        m[1 + right.dy, 1 + right.dx] += side
        m[1, 1] += residue
        masks[action] = m

    for m in masks.values():
        assert abs(m.sum() - 1.0) <= _SUM_TOL
        m.flags.writeable = False
    return masks


def action_matrix(stiffness: float = 0.0) -> np.ndarray:
    """Row-stochastic action-to-action transition matrix.

    ``stiffness`` interpolates between a uniform switch (0, the default) and
    keeping the current heading forever (1).
    """
    if not 0.0 <= stiffness <= 1.0:
        raise ValueError(f"stiffness must be in [0, 1], got {stiffness}")
    p = stiffness * np.eye(N_ACTIONS) + (1.0 - stiffness) / N_ACTIONS
    p.flags.writeable = False
    return p


@dataclass(frozen=True, eq=False)
class TransitionKernel:
    """Censored and renormalized per-cell, per-action transition stencils.

    ``stencils[i, j, a, u, v]`` is the probability of moving from cell
    (i, j) under action a to cell (i + u - 1, j + v - 1).  Entries aimed at
    obstacles or out of bounds are exactly zero; rows for free cells sum to
    one and rows for obstacle cells are all zero.
    """

    grid: GridMap
    stencils: np.ndarray  # (rows, cols, N_ACTIONS, 3, 3)

    @property
    def support(self) -> np.ndarray:
        return self.stencils > 0.0


def _stack_masks(masks: Mapping[Action, np.ndarray]) -> np.ndarray:
    stacked = np.zeros((N_ACTIONS, 3, 3))
    for action in ACTIONS:
        m = np.asarray(masks[action], dtype=float)
        if m.shape != (3, 3):
            raise ValueError(f"mask for {action.name} is not 3x3")
        if (m < 0).any():
            raise ValueError(f"mask for {action.name} has negative weights")
        if abs(m.sum() - 1.0) > _SUM_TOL:
            raise ValueError(f"mask for {action.name} does not sum to 1")
        stacked[action.index] = m
    return stacked


def build_kernel(
    grid: GridMap, masks: Mapping[Action, np.ndarray] | None = None
) -> TransitionKernel:
    """Censor the base masks against obstacles/bounds and renormalize.

    Stencil entries landing on an obstacle or outside the grid are zeroed
    and the surviving entries rescaled to sum to one.  Raises
    KernelDegenerateError if a free cell loses all of its mass for some
    action, which cannot happen with the default masks below sharpness 1.
    """
    if masks is None:
        masks = default_masks()
    stacked = _stack_masks(masks)

    n, m = grid.rows, grid.cols
    padded = np.zeros((n + 2, m + 2), dtype=bool)
    padded[1:-1, 1:-1] = grid.free
    valid = np.empty((n, m, 3, 3), dtype=bool)
    for u in range(3):
        for v in range(3):
            valid[:, :, u, v] = padded[u : u + n, v : v + m]

    stencils = stacked[None, None, :, :, :] * valid[:, :, None, :, :]
    sums = stencils.sum(axis=(3, 4))  # (n, m, N_ACTIONS)

    free = grid.free
    dead = (sums == 0.0) & free[:, :, None]
    if dead.any():
        i, j, a = np.argwhere(dead)[0]
        raise KernelDegenerateError(
            f"free cell ({i}, {j}) has no remaining transition mass for "
            f"action '{ACTIONS[a].name}'"
        )

    safe = np.where(sums > 0.0, sums, 1.0)
    stencils /= safe[:, :, :, None, None]
    stencils[~free] = 0.0
    stencils.flags.writeable = False
    return TransitionKernel(grid, stencils)
