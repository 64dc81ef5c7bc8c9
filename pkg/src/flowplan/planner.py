"""Path extraction on top of the message-passing engine.

The greedy planner precomputes the backward flow once, then walks the
horizon forward: at each slice it forms the posterior, commits to the
argmax (cell, action) pair, and replaces the forward message with a delta
there.  ``sample_path`` runs the same loop but draws from the posterior
instead of taking the argmax, which turns the planner into a generator of
plausible paths.
"""

from __future__ import annotations

from dataclasses import dataclass
from math import inf, log
from typing import Callable, Sequence

import numpy as np

from . import engine
from .engine import MessageTensor
from .errors import InvalidGoalError, NoFeasiblePathError
from .grid import (
    Action,
    Cell,
    GridMap,
    N_ACTIONS,
    STILL,
    TransitionKernel,
    action_matrix,
    build_kernel,
    default_masks,
)

POLICY_ABORT = "abort"
POLICY_WAIT = "wait"
POLICY_SAMPLE = "sample"
POLICIES = (POLICY_ABORT, POLICY_WAIT, POLICY_SAMPLE)

GoalSpec = Sequence[tuple[Cell, float] | Cell]


def goal_marginal(goals: GoalSpec, grid: GridMap) -> np.ndarray:
    """Cell marginal with normalized weight on each goal, zero elsewhere."""
    pairs = _normalized_goals(goals)
    out = np.zeros((grid.rows, grid.cols))
    for cell, weight in pairs:
        if not grid.is_free(cell):
            raise InvalidGoalError(f"goal {cell} is on an obstacle")
        out[cell] += weight
    return out


def _normalized_goals(goals: GoalSpec) -> tuple[tuple[Cell, float], ...]:
    pairs = []
    for g in goals:
        if isinstance(g[0], (tuple, list)):
            cell, weight = g
            pairs.append(((int(cell[0]), int(cell[1])), float(weight)))
        else:
            pairs.append(((int(g[0]), int(g[1])), 1.0))
    if not pairs:
        raise InvalidGoalError("at least one goal is required")
    total = sum(w for _, w in pairs)
    if total <= 0.0 or any(w <= 0.0 for _, w in pairs):
        raise InvalidGoalError("goal weights must be positive")
    return tuple((cell, w / total) for cell, w in pairs)


@dataclass(frozen=True)
class Scenario:
    """A single-agent planning problem.

    ``horizon = None`` means "use the minimum feasible time", searched up
    to ``t_max`` slices (default four sweeps of the grid area).
    ``start_action = None`` leaves the initial action free (uniform); a
    concrete Action pins it as a joint delta with the start cell.
    """

    grid: GridMap
    start_cell: Cell
    goals: GoalSpec
    start_action: Action | None = None
    horizon: int | None = None
    t_max: int | None = None
    sharpness: float = 0.8
    stiffness: float = 0.0
    seed: int = 0
    policy: str = POLICY_ABORT
    goal_stop: bool = True

    def __post_init__(self):
        if not self.grid.is_free(self.start_cell):
            raise ValueError(f"start {self.start_cell} is not a free cell")
        object.__setattr__(self, "goals", _normalized_goals(self.goals))
        for cell, _ in self.goals:
            if not self.grid.is_free(cell):
                raise InvalidGoalError(f"goal {cell} is on an obstacle")
        if self.policy not in POLICIES:
            raise ValueError(f"unknown policy {self.policy!r}")
        if self.horizon is not None and self.horizon < 1:
            raise ValueError("horizon must be positive")
        if self.t_max is not None and self.t_max < 2:
            raise ValueError("t_max must be at least 2")

    @property
    def goal_cells(self) -> tuple[Cell, ...]:
        return tuple(cell for cell, _ in self.goals)

    @property
    def search_cap(self) -> int:
        if self.t_max is not None:
            return self.t_max
        return 4 * self.grid.rows * self.grid.cols


@dataclass(frozen=True)
class Path:
    """A realized trajectory: (t, cell, action) per slice, t starting at 1.

    The action drives the transition out of its slice; the final slice has
    no outgoing transition, so its action is None.
    """

    steps: tuple[tuple[int, Cell, int | None], ...]
    reached_goal: bool

    @property
    def t_used(self) -> int:
        return len(self.steps)

    @property
    def transitions(self) -> int:
        return len(self.steps) - 1

    def cells(self) -> list[Cell]:
        return [cell for _, cell, _ in self.steps]


def validate_path(path: Path, grid: GridMap) -> None:
    """Assert the structural invariants of a path; raises ValueError."""
    if not path.steps:
        raise ValueError("empty path")
    for k, (t, cell, action) in enumerate(path.steps):
        if t != path.steps[0][0] + k:
            raise ValueError("time indices must increase by 1")
        if not grid.is_free(cell):
            raise ValueError(f"step at t={t} on obstacle/out of bounds {cell}")
        if action is None and k != len(path.steps) - 1:
            raise ValueError("only the final step may omit the action")
        if action is not None and not 0 <= action < N_ACTIONS:
            raise ValueError(f"bad action index {action}")
    for (_, a, _), (_, b, _) in zip(path.steps, path.steps[1:]):
        if max(abs(a[0] - b[0]), abs(a[1] - b[1])) > 1:
            raise ValueError(f"non-adjacent consecutive cells {a} -> {b}")


@dataclass(frozen=True, eq=False)
class PlanSetup:
    """Kernel, action matrix and goal marginal materialized from a scenario."""

    kernel: TransitionKernel
    p_action: np.ndarray
    goal: np.ndarray
    start_actions: np.ndarray | None


def build_setup(scenario: Scenario) -> PlanSetup:
    kernel = build_kernel(scenario.grid, default_masks(scenario.sharpness))
    p_action = action_matrix(scenario.stiffness)
    goal = goal_marginal(scenario.goals, scenario.grid)
    pi = None
    if scenario.start_action is not None:
        pi = np.zeros(N_ACTIONS)
        pi[scenario.start_action.index] = 1.0
    return PlanSetup(kernel, p_action, goal, pi)


def resolve_horizon(scenario: Scenario, setup: PlanSetup | None = None) -> int:
    """Fixed horizon if set, otherwise the minimum feasible time.

    With a pinned start action the minimum is taken over flows that carry
    backward mass on that exact (cell, action) pair, since a joint delta
    cannot exploit other initial headings.
    """
    if scenario.horizon is not None:
        return scenario.horizon
    setup = setup or build_setup(scenario)
    pinned = (
        scenario.start_action.index if scenario.start_action is not None else None
    )
    return engine.min_time(
        setup.kernel,
        setup.p_action,
        scenario.start_cell,
        setup.goal,
        scenario.search_cap,
        start_action=pinned,
    )


def _initial_action_weights(
    setup: PlanSetup, start: Cell, next_cell: Cell, next_action: int | None
) -> np.ndarray:
    # weight of each candidate first action given the first committed move
    du, dv = next_cell[0] - start[0] + 1, next_cell[1] - start[1] + 1
    pi = (
        setup.start_actions
        if setup.start_actions is not None
        else engine.uniform_actions()
    )
    w = pi * setup.kernel.stencils[start[0], start[1], :, du, dv]
    if next_action is not None:
        w = w * setup.p_action[:, next_action]
    return w


def _argmax_joint(values: np.ndarray) -> tuple[Cell, int]:
    # ties break toward the lowest flat (row, col, action) index
    flat = int(np.argmax(values))
    i, j, a = np.unravel_index(flat, values.shape)
    return (int(i), int(j)), int(a)


def _argmax_state(values: np.ndarray) -> Cell:
    flat = int(np.argmax(values))
    i, j = np.unravel_index(flat, values.shape)
    return (int(i), int(j))


def _sample_joint(values: np.ndarray, rng: np.random.Generator) -> tuple[Cell, int]:
    flat = values.reshape(-1)
    flat = flat / flat.sum()
    pick = int(rng.choice(flat.size, p=flat))
    i, j, a = np.unravel_index(pick, values.shape)
    return (int(i), int(j)), int(a)


def _sample_state(values: np.ndarray, rng: np.random.Generator) -> Cell:
    flat = values.reshape(-1)
    flat = flat / flat.sum()
    pick = int(rng.choice(flat.size, p=flat))
    i, j = np.unravel_index(pick, values.shape)
    return (int(i), int(j))


def _delta_forward(grid: GridMap, cell: Cell, action: int) -> MessageTensor:
    values = np.zeros((grid.rows, grid.cols, N_ACTIONS))
    values[cell[0], cell[1], action] = 1.0
    return MessageTensor(values, engine.FORWARD)


def _extract(
    scenario: Scenario,
    select_joint: Callable[[np.ndarray], tuple[Cell, int]],
    select_state: Callable[[np.ndarray], Cell],
    select_initial: Callable[[np.ndarray], int],
    sample_fallback: Callable[[np.ndarray], tuple[Cell, int]] | None,
) -> Path:
    setup = build_setup(scenario)
    grid = scenario.grid
    goal_cells = set(scenario.goal_cells)
    start = scenario.start_cell

    if start in goal_cells:
        return Path(((1, start, None),), True)

    horizon = resolve_horizon(scenario, setup)
    if horizon < 2:
        if scenario.policy == POLICY_ABORT:
            raise NoFeasiblePathError(
                f"horizon {horizon} leaves no room for a transition"
            )
        return Path(((1, start, None),), False)

    backward = engine.backward_flow(
        setup.kernel, setup.p_action, setup.goal, horizon
    )

    if scenario.start_action is not None:
        f = _delta_forward(grid, start, scenario.start_action.index)
        first_action: int | None = scenario.start_action.index
    else:
        f = engine.initial_forward(setup.kernel, start)
        first_action = None

    steps: list[tuple[int, Cell, int | None]] = [(1, start, first_action)]
    cur = start
    reached = False

    def commit_first(cell: Cell, action: int | None) -> None:
        if steps[0][2] is None:
            weights = _initial_action_weights(setup, start, cell, action)
            steps[0] = (1, start, select_initial(weights))

    for t in range(2, horizon):
        f_next = engine.forward_step(f, setup.kernel, setup.p_action)
        post = engine.posterior(f_next, backward[t - 1])
        if post.is_dead:
            if scenario.policy == POLICY_ABORT:
                raise NoFeasiblePathError(
                    f"posterior vanished at slice {t} (horizon {horizon})"
                )
            if scenario.policy == POLICY_WAIT:
                cell, action = cur, STILL.index
            else:
                cell, action = sample_fallback(f_next.values)
        else:
            cell, action = select_joint(post.values)
        commit_first(cell, action)
        steps.append((t, cell, action))
        f = _delta_forward(grid, cell, action)
        cur = cell
        if scenario.goal_stop and cell in goal_cells:
            reached = True
            break
    else:
        f_fin = engine.forward_final(f, setup.kernel)
        post_fin = f_fin * setup.goal
        total = post_fin.sum()
        if total > 0.0:
            cell = select_state(post_fin / total)
        elif scenario.policy == POLICY_ABORT:
            raise NoFeasiblePathError(
                f"final posterior vanished (horizon {horizon})"
            )
        elif scenario.policy == POLICY_WAIT:
            cell = cur
        else:
            cell = select_state(f_fin)
        commit_first(cell, None)
        steps.append((horizon, cell, None))
        reached = cell in goal_cells

    return Path(tuple(steps), reached)


def greedy_plan(scenario: Scenario) -> Path:
    """Greedy maximum-posterior path extraction.

    Computes the full backward flow once, then commits the joint posterior
    argmax slice by slice, re-instantiating the forward message as a delta
    on each committed pair.  Stops early as soon as a goal cell is
    committed (disable with ``goal_stop=False``).  A vanished posterior is
    handled per ``scenario.policy``: abort (raise), wait (emit still), or
    sample (draw from the forward message).
    """
    rng = np.random.default_rng(scenario.seed)
    return _extract(
        scenario,
        select_joint=_argmax_joint,
        select_state=_argmax_state,
        select_initial=lambda w: int(np.argmax(w)),
        sample_fallback=lambda values: _sample_joint(values, rng),
    )


def sample_path(scenario: Scenario) -> Path:
    """Like greedy_plan, but draw every commitment from the posterior."""
    rng = np.random.default_rng(scenario.seed)

    def pick_initial(weights: np.ndarray) -> int:
        return int(rng.choice(N_ACTIONS, p=weights / weights.sum()))

    return _extract(
        scenario,
        select_joint=lambda values: _sample_joint(values, rng),
        select_state=lambda values: _sample_state(values, rng),
        select_initial=pick_initial,
        sample_fallback=lambda values: _sample_joint(values, rng),
    )


def path_likelihood(path: Path, scenario: Scenario) -> float:
    """Log-probability of a realized trajectory under the scenario's model.

    Product of the initial (cell, action) probability, every action- and
    state-transition factor, and the final state transition; -inf as soon
    as any factor is zero.
    """
    setup = build_setup(scenario)
    steps = path.steps
    t0, cell0, action0 = steps[0]
    if cell0 != scenario.start_cell:
        return -inf
    if scenario.start_action is not None:
        if action0 != scenario.start_action.index:
            return -inf
        total = 0.0
    else:
        total = log(1.0 / N_ACTIONS)  # free initial action
    if len(steps) == 1:
        return total

    for (t, cell, action), (_, nxt, nxt_action) in zip(steps, steps[1:]):
        if action is None:
            raise ValueError("only the final step may omit the action")
        du, dv = nxt[0] - cell[0] + 1, nxt[1] - cell[1] + 1
        if not (0 <= du <= 2 and 0 <= dv <= 2):
            return -inf
        w = setup.kernel.stencils[cell[0], cell[1], action, du, dv]
        if w == 0.0:
            return -inf
        total += log(w)
        if nxt_action is not None:
            pa = setup.p_action[action, nxt_action]
            if pa == 0.0:
                return -inf
            total += log(pa)
    return total


def scenario_flows(scenario: Scenario, horizon: int | None = None) -> engine.FlowSet:
    """Full flow set for a scenario; handy for rendering and diagnostics."""
    setup = build_setup(scenario)
    if horizon is None:
        horizon = resolve_horizon(scenario, setup)
    return engine.run_flows(
        setup.kernel,
        setup.p_action,
        scenario.start_cell,
        setup.goal,
        horizon,
        setup.start_actions,
    )
