"""Sequentially scheduled agents replanning on dynamic maps.

Each agent sees the static map plus everyone else's current cell as
obstacles (and optionally some other agents as goals).  Agents act one at
a time inside a round; a move is visible to everyone scheduled after it,
which rules out collisions by construction.  When an agent's replanned
flow is infeasible it falls back to its policy, which is "wait" by
default: emit a still action and try again next round.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from . import engine
from .errors import InvalidGoalError, NoFeasiblePathError, UnreachableError
from .grid import (
    Cell,
    GridMap,
    N_ACTIONS,
    STILL,
    action_matrix,
    build_kernel,
    default_masks,
)
from .planner import (
    POLICY_ABORT,
    POLICY_SAMPLE,
    POLICY_WAIT,
    GoalSpec,
    Path,
    _argmax_joint,
    _argmax_state,
    _initial_action_weights,
    _normalized_goals,
    _sample_joint,
    PlanSetup,
    goal_marginal,
)


@dataclass(frozen=True)
class AgentSpec:
    """One agent's identity, endpoints, motion parameters, and fallback."""

    agent_id: int
    start_cell: Cell
    goals: GoalSpec = ()
    sharpness: float = 0.8
    stiffness: float = 0.0
    policy: str = POLICY_WAIT
    chase: tuple[int, ...] = ()  # other agents whose positions become goals

    def __post_init__(self):
        object.__setattr__(
            self,
            "goals",
            _normalized_goals(self.goals) if self.goals else (),
        )
        if not self.goals and not self.chase:
            raise InvalidGoalError(
                f"agent {self.agent_id} has neither goals nor agents to chase"
            )


@dataclass(frozen=True)
class AgentSnapshot:
    agent_id: int
    cell: Cell
    action: int | None  # current heading, None before the first move
    arrived: bool


@dataclass(frozen=True)
class WorldState:
    """Positions and statuses of every agent at one global time slice."""

    time: int
    agents: tuple[AgentSnapshot, ...]

    def by_id(self) -> dict[int, AgentSnapshot]:
        return {a.agent_id: a for a in self.agents}

    def all_arrived(self) -> bool:
        return all(a.arrived for a in self.agents)


@dataclass(frozen=True)
class SimulationResult:
    states: tuple[WorldState, ...]
    paths: dict[int, Path]
    timed_out: bool

    @property
    def t_final(self) -> int:
        return self.states[-1].time


def dynamic_map(
    grid: GridMap,
    snapshots: Mapping[int, AgentSnapshot] | Sequence[AgentSnapshot],
    agent_id: int,
    include_arrived: bool = True,
    transparent: tuple[int, ...] = (),
) -> GridMap:
    """The map one agent plans on: static obstacles plus other agents."""
    if isinstance(snapshots, Mapping):
        snapshots = list(snapshots.values())
    extra = [
        s.cell
        for s in snapshots
        if s.agent_id != agent_id
        and s.agent_id not in transparent
        and (include_arrived or not s.arrived)
    ]
    return grid.with_obstacles(extra)


def _goal_cells(spec: AgentSpec, others: Mapping[int, AgentSnapshot]):
    pairs = list(spec.goals)
    for target in spec.chase:
        pairs.append((others[target].cell, 1.0))
    return pairs


class _AgentRunner:
    """Replans one agent per round; caches its masks and action matrix."""

    def __init__(self, spec: AgentSpec):
        self.spec = spec
        self.masks = default_masks(spec.sharpness)
        self.p_action = action_matrix(spec.stiffness)

    def plan_step(
        self,
        grid: GridMap,
        snapshots: Mapping[int, AgentSnapshot],
        remaining: int,
        rng: np.random.Generator,
        arrived_vanish: bool = False,
    ) -> tuple[Cell, int, int | None, bool]:
        """One greedy step; returns (next_cell, executed_action, heading, arrived).

        The flow is re-instantiated at the agent's current (cell, heading)
        joint delta; a heading of None (before the first move) leaves the
        initial action free.  The executed action is the stored heading,
        backfilled from the committed move when the heading was free.
        Falls back to a still step (or a forward sample, per policy)
        whenever the dynamic map makes the goal infeasible right now.
        """
        spec = self.spec
        me = snapshots[spec.agent_id]
        try:
            dyn = dynamic_map(
                grid,
                snapshots,
                spec.agent_id,
                include_arrived=not arrived_vanish,
                transparent=spec.chase,
            )
            goal_pairs = _goal_cells(spec, snapshots)
            goal = goal_marginal(goal_pairs, dyn)
        except InvalidGoalError:
            return self._fallback(me, rng, None, None)

        if goal[me.cell] > 0.0:
            return me.cell, STILL.index, None, True

        kernel = build_kernel(dyn, self.masks)
        setup = PlanSetup(kernel, self.p_action, goal, None)
        try:
            horizon = engine.min_time(
                kernel,
                self.p_action,
                me.cell,
                goal,
                max(remaining, 2),
                start_action=me.action,
            )
        except UnreachableError:
            return self._fallback(me, rng, None, setup)
        if horizon > remaining:
            return self._fallback(me, rng, None, setup)

        if me.action is None:
            f = engine.initial_forward(kernel, me.cell)
        else:
            values = np.zeros((dyn.rows, dyn.cols, N_ACTIONS))
            values[me.cell[0], me.cell[1], me.action] = 1.0
            f = engine.MessageTensor(values, engine.FORWARD)

        def executed_for(cell: Cell, heading: int | None) -> int:
            if me.action is not None:
                return me.action
            weights = _initial_action_weights(setup, me.cell, cell, heading)
            return int(np.argmax(weights))

        chased = {snapshots[t].cell for t in spec.chase}

        if horizon == 2:
            f_fin = engine.forward_final(f, kernel)
            post = f_fin * goal
            total = post.sum()
            if total == 0.0:
                return self._fallback(me, rng, None, setup)
            cell = _argmax_state(post / total)
            if cell in chased:
                # capture without co-occupying the target's cell
                return me.cell, STILL.index, me.action, True
            return cell, executed_for(cell, None), None, True

        backward = engine.backward_flow(kernel, self.p_action, goal, horizon)
        f2 = engine.forward_step(f, kernel, self.p_action)
        post = engine.posterior(f2, backward[1])
        if post.is_dead:
            return self._fallback(me, rng, f2.values, setup)
        cell, heading = _argmax_joint(post.values)
        if cell in chased:
            return me.cell, STILL.index, me.action, True
        arrived = goal[cell] > 0.0
        return cell, executed_for(cell, heading), heading, arrived

    def _fallback(self, me: AgentSnapshot, rng, forward_values, setup):
        if self.spec.policy == POLICY_ABORT:
            raise NoFeasiblePathError(
                f"agent {self.spec.agent_id} blocked at {me.cell}"
            )
        if self.spec.policy == POLICY_SAMPLE and forward_values is not None:
            cell, heading = _sample_joint(forward_values, rng)
            if me.action is not None:
                executed = me.action
            else:
                weights = _initial_action_weights(setup, me.cell, cell, heading)
                executed = int(np.argmax(weights))
            return cell, executed, heading, False
        return me.cell, STILL.index, STILL.index, False


def step_world(
    grid: GridMap,
    state: WorldState,
    specs: Sequence[AgentSpec],
    t_max: int,
    order: Sequence[int],
    rng: np.random.Generator,
    runners: Mapping[int, _AgentRunner] | None = None,
    paths: Mapping[int, list] | None = None,
    arrived_vanish: bool = False,
) -> WorldState:
    """Advance the world one slice, scheduling agents in the given order.

    Position updates apply immediately, so agents later in the order see
    the moves of earlier ones.
    """
    if runners is None:
        runners = {s.agent_id: _AgentRunner(s) for s in specs}
    snapshots = state.by_id()
    remaining = t_max - state.time + 1
    for aid in order:
        me = snapshots[aid]
        if me.arrived:
            continue
        cell, executed, heading, arrived = runners[aid].plan_step(
            grid, snapshots, remaining, rng, arrived_vanish
        )
        snapshots[aid] = AgentSnapshot(aid, cell, heading, arrived)
        if paths is not None:
            steps = paths[aid]
            t_prev, prev_cell, _ = steps[-1]
            steps[-1] = (t_prev, prev_cell, executed)
            steps.append((state.time + 1, cell, None))

    moving = [
        s.cell for s in snapshots.values() if not (arrived_vanish and s.arrived)
    ]
    assert len(set(moving)) == len(moving), "two agents share a cell"
    assert all(grid.is_free(c) for c in moving), "agent on an obstacle"
    return WorldState(state.time + 1, tuple(snapshots[s.agent_id] for s in specs))


def simulate(
    specs: Sequence[AgentSpec],
    grid: GridMap,
    t_max: int,
    schedule: str = "fixed",
    seed: int = 0,
    arrived_vanish: bool = False,
) -> SimulationResult:
    """Run rounds until every agent arrived or the time budget is spent.

    ``schedule`` is "fixed" (spec order every round) or "random"
    (seeded permutation per round).  Arrived agents stay on the map as
    obstacles unless ``arrived_vanish`` removes them.  Running out of
    time is reported via ``timed_out`` on the result, not an exception,
    and the partial trace is returned.
    """
    if schedule not in ("fixed", "random"):
        raise ValueError(f"unknown schedule {schedule!r}")
    ids = [s.agent_id for s in specs]
    if len(set(ids)) != len(ids):
        raise ValueError("agent ids must be unique")
    starts = [s.start_cell for s in specs]
    if len(set(starts)) != len(starts):
        raise ValueError("agents must start on distinct cells")
    for s in specs:
        if not grid.is_free(s.start_cell):
            raise ValueError(f"agent {s.agent_id} starts on an obstacle")

    rng = np.random.default_rng(seed)
    runners = {s.agent_id: _AgentRunner(s) for s in specs}

    snapshots = {}
    for s in specs:
        static_goals = {cell for cell, _ in s.goals}
        arrived = s.start_cell in static_goals
        snapshots[s.agent_id] = AgentSnapshot(s.agent_id, s.start_cell, None, arrived)
    state = WorldState(1, tuple(snapshots[s.agent_id] for s in specs))
    states = [state]
    paths = {aid: [(1, snapshots[aid].cell, None)] for aid in ids}

    while not state.all_arrived() and state.time < t_max:
        order = list(ids) if schedule == "fixed" else [
            ids[k] for k in rng.permutation(len(ids))
        ]
        state = step_world(
            grid, state, specs, t_max, order, rng, runners, paths, arrived_vanish
        )
        states.append(state)

    final = state.by_id()
    result_paths = {
        aid: Path(tuple(steps), final[aid].arrived) for aid, steps in paths.items()
    }
    return SimulationResult(
        states=tuple(states),
        paths=result_paths,
        timed_out=not state.all_arrived(),
    )
