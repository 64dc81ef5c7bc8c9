"""Sum-product message passing over N x M x 9 state-action tensors.

Forward messages diffuse probability mass from the start instantiation,
backward messages pull it in from the goal, and posteriors are their
normalized pointwise products.  Every message is renormalized to total
mass one after each step; an all-zero ("dead") backward or posterior
tensor is a value, not an error, because callers need to observe
infeasibility and react (wait, resample, or abort).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DeadFlowError, InvalidGoalError, UnreachableError
from .grid import Cell, N_ACTIONS, TransitionKernel

FORWARD = "forward"
BACKWARD = "backward"
POSTERIOR = "posterior"

_OFFSETS = (-1, 0, 1)


@dataclass(frozen=True, eq=False)
class MessageTensor:
    """A single forward, backward, or posterior message at one time step."""

    values: np.ndarray  # (rows, cols, N_ACTIONS), nonnegative
    kind: str

    def __post_init__(self):
        if self.kind not in (FORWARD, BACKWARD, POSTERIOR):
            raise ValueError(f"unknown message kind {self.kind!r}")
        values = np.asarray(self.values, dtype=float)
        values.flags.writeable = False
        object.__setattr__(self, "values", values)

    @property
    def is_dead(self) -> bool:
        return not self.values.any()

    def state_marginal(self) -> np.ndarray:
        """Mass per cell, summed over the action axis."""
        return self.values.sum(axis=2)


@dataclass(frozen=True, eq=False)
class FlowSet:
    """Forward, backward, and posterior messages over a full horizon.

    Joint state-action tensors cover t = 1 .. T-1; the final slice only
    carries states, so it is stored as three separate cell marginals.
    ``forward_norms`` records the divisor applied when normalizing each
    forward message (t = 2 .. T), which lets callers reconstruct the
    unnormalized total mass.
    """

    horizon: int
    forward: tuple[MessageTensor, ...]
    forward_final: np.ndarray
    forward_norms: tuple[float, ...]
    backward: tuple[MessageTensor, ...]
    backward_final: np.ndarray
    posterior: tuple[MessageTensor, ...]
    posterior_final: np.ndarray

    def forward_at(self, t: int) -> MessageTensor:
        return self.forward[t - 1]

    def backward_at(self, t: int) -> MessageTensor:
        return self.backward[t - 1]

    def posterior_at(self, t: int) -> MessageTensor:
        return self.posterior[t - 1]


def _axis_slices(n: int, d: int) -> tuple[slice, slice]:
    # source range and the same range shifted by d, both clipped to [0, n)
    src = slice(max(0, -d), n - max(0, d))
    dst = slice(max(0, d), n + min(0, d))
    return src, dst


def _push(values: np.ndarray, stencils: np.ndarray) -> np.ndarray:
    """Scatter cell mass one step along every stencil entry.

    Input and output are (rows, cols, A) arrays indexed by the action that
    drives the move.  Out-of-bounds targets carry zero stencil weight, so
    clipped slices are exact.
    """
    n, m = values.shape[:2]
    out = np.zeros_like(values)
    for u, di in enumerate(_OFFSETS):
        rs, rd = _axis_slices(n, di)
        for v, dj in enumerate(_OFFSETS):
            cs, cd = _axis_slices(m, dj)
            out[rd, cd, :] += stencils[rs, cs, :, u, v] * values[rs, cs, :]
    return out


def _pull(values: np.ndarray, stencils: np.ndarray) -> np.ndarray:
    """Gather successor mass back onto each (cell, action) pair."""
    n, m = values.shape[:2]
    out = np.zeros_like(values)
    for u, di in enumerate(_OFFSETS):
        rs, rd = _axis_slices(n, di)
        for v, dj in enumerate(_OFFSETS):
            cs, cd = _axis_slices(m, dj)
            out[rs, cs, :] += stencils[rs, cs, :, u, v] * values[rd, cd, :]
    return out


def _pull_state(state: np.ndarray, stencils: np.ndarray) -> np.ndarray:
    """Gather a cells-only marginal onto (cell, action) pairs."""
    n, m = state.shape
    out = np.zeros(stencils.shape[:3])
    for u, di in enumerate(_OFFSETS):
        rs, rd = _axis_slices(n, di)
        for v, dj in enumerate(_OFFSETS):
            cs, cd = _axis_slices(m, dj)
            out[rs, cs, :] += stencils[rs, cs, :, u, v] * state[rd, cd, None]
    return out


def _forward_raw(
    values: np.ndarray, kernel: TransitionKernel, p_action: np.ndarray
) -> np.ndarray:
    moved = _push(values, kernel.stencils)
    return moved @ p_action  # mix over the previous action axis


def _backward_raw(
    values: np.ndarray, kernel: TransitionKernel, p_action: np.ndarray
) -> np.ndarray:
    mixed = values @ p_action.T
    return _pull(mixed, kernel.stencils)


def forward_step(
    f_prev: MessageTensor, kernel: TransitionKernel, p_action: np.ndarray
) -> MessageTensor:
    """One forward sum-product step; output renormalized to total mass 1."""
    if f_prev.kind != FORWARD:
        raise ValueError("forward_step expects a forward message")
    if f_prev.is_dead:
        raise DeadFlowError("forward message has no mass")
    out = _forward_raw(f_prev.values, kernel, p_action)
    total = out.sum()
    if total == 0.0:
        raise DeadFlowError("forward mass vanished (support on obstacles only)")
    return MessageTensor(out / total, FORWARD)


def backward_step(
    b_next: MessageTensor, kernel: TransitionKernel, p_action: np.ndarray
) -> MessageTensor:
    """One backward sum-product step; an all-zero result stays a dead value."""
    if b_next.kind != BACKWARD:
        raise ValueError("backward_step expects a backward message")
    out = _backward_raw(b_next.values, kernel, p_action)
    total = out.sum()
    if total > 0.0:
        out /= total
    return MessageTensor(out, BACKWARD)


def backward_terminal(
    goal: np.ndarray, kernel: TransitionKernel
) -> MessageTensor:
    """Backward message one step before the horizon, gathered from the goal."""
    goal = _checked_goal(goal, kernel)
    out = _pull_state(goal, kernel.stencils)
    total = out.sum()
    if total == 0.0:
        raise InvalidGoalError("goal mass sits entirely on obstacle cells")
    return MessageTensor(out / total, BACKWARD)


def forward_final(
    f_prev: MessageTensor, kernel: TransitionKernel
) -> np.ndarray:
    """Final forward cell marginal: last transition summed over actions."""
    if f_prev.is_dead:
        raise DeadFlowError("forward message has no mass")
    out = _push(f_prev.values, kernel.stencils).sum(axis=2)
    total = out.sum()
    if total == 0.0:
        raise DeadFlowError("forward mass vanished (support on obstacles only)")
    return out / total


def posterior(f: MessageTensor, b: MessageTensor) -> MessageTensor:
    """Normalized pointwise product; dead (all-zero) if supports are disjoint."""
    if f.values.shape != b.values.shape:
        raise ValueError("forward/backward shapes differ")
    out = f.values * b.values
    total = out.sum()
    if total > 0.0:
        out = out / total
    return MessageTensor(out, POSTERIOR)


def uniform_actions() -> np.ndarray:
    return np.full(N_ACTIONS, 1.0 / N_ACTIONS)


def _checked_goal(goal: np.ndarray, kernel: TransitionKernel) -> np.ndarray:
    goal = np.asarray(goal, dtype=float)
    grid = kernel.grid
    if goal.shape != (grid.rows, grid.cols):
        raise ValueError("goal marginal shape does not match the grid")
    if (goal < 0).any():
        raise ValueError("goal marginal has negative mass")
    total = goal.sum()
    if total == 0.0:
        raise InvalidGoalError("goal marginal carries no mass")
    if (goal[~grid.free] > 0).any():
        raise InvalidGoalError("goal mass placed on obstacle cells")
    return goal / total


def _checked_start(
    start_cell: Cell, start_actions: np.ndarray | None, kernel: TransitionKernel
) -> np.ndarray:
    if not kernel.grid.is_free(start_cell):
        raise ValueError(f"start cell {start_cell} is not a free cell")
    if start_actions is None:
        return uniform_actions()
    pi = np.asarray(start_actions, dtype=float)
    if pi.shape != (N_ACTIONS,):
        raise ValueError("initial action distribution must have 9 entries")
    if (pi < 0).any() or pi.sum() == 0.0:
        raise ValueError("initial action distribution must be a distribution")
    return pi / pi.sum()


def initial_forward(
    kernel: TransitionKernel,
    start_cell: Cell,
    start_actions: np.ndarray | None = None,
) -> MessageTensor:
    """Start instantiation: a cell delta times an initial action distribution."""
    pi = _checked_start(start_cell, start_actions, kernel)
    grid = kernel.grid
    values = np.zeros((grid.rows, grid.cols, N_ACTIONS))
    values[start_cell[0], start_cell[1], :] = pi
    return MessageTensor(values, FORWARD)


def backward_flow(
    kernel: TransitionKernel,
    p_action: np.ndarray,
    goal: np.ndarray,
    horizon: int,
) -> list[MessageTensor]:
    """Backward messages for t = 1 .. horizon-1, latest time last."""
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    chain = [backward_terminal(goal, kernel)]
    for _ in range(horizon - 2):
        chain.append(backward_step(chain[-1], kernel, p_action))
    chain.reverse()
    return chain


def run_flows(
    kernel: TransitionKernel,
    p_action: np.ndarray,
    start_cell: Cell,
    goal: np.ndarray,
    horizon: int,
    start_actions: np.ndarray | None = None,
) -> FlowSet:
    """Full forward/backward/posterior flow for a fixed horizon.

    The start is instantiated as a cell delta with the given (default
    uniform) initial action distribution, the goal as a cell marginal at
    the final slice.  Posteriors with disjoint forward/backward support
    come back dead rather than raising, so infeasible horizons can be
    inspected.
    """
    if horizon < 2:
        raise ValueError("horizon must be at least 2")
    goal = _checked_goal(goal, kernel)

    forward = [initial_forward(kernel, start_cell, start_actions)]
    norms: list[float] = []
    for _ in range(2, horizon):
        raw = _forward_raw(forward[-1].values, kernel, p_action)
        total = raw.sum()
        if total == 0.0:
            raise DeadFlowError("forward mass vanished")
        norms.append(total)
        forward.append(MessageTensor(raw / total, FORWARD))
    final_raw = _push(forward[-1].values, kernel.stencils).sum(axis=2)
    final_total = final_raw.sum()
    if final_total == 0.0:
        raise DeadFlowError("forward mass vanished at the final slice")
    norms.append(final_total)
    forward_fin = final_raw / final_total

    backward = backward_flow(kernel, p_action, goal, horizon)

    posteriors = [posterior(f, b) for f, b in zip(forward, backward)]
    post_fin = forward_fin * goal
    total = post_fin.sum()
    if total > 0.0:
        post_fin = post_fin / total

    return FlowSet(
        horizon=horizon,
        forward=tuple(forward),
        forward_final=forward_fin,
        forward_norms=tuple(norms),
        backward=tuple(backward),
        backward_final=goal,
        posterior=tuple(posteriors),
        posterior_final=post_fin,
    )


def min_time(
    kernel: TransitionKernel,
    p_action: np.ndarray,
    start_cell: Cell,
    goal: np.ndarray,
    t_max: int,
    start_action: int | None = None,
) -> int:
    """Smallest horizon whose backward flow puts mass on the start cell.

    Counted in time slices: a start already on the goal needs 1.  By
    default any initial action counts (backward mass summed over the
    action axis); passing ``start_action`` requires mass on that specific
    (cell, action) pair instead.  Support is propagated as booleans, not
    floats, so long horizons cannot underflow into false negatives.
    Raises UnreachableError when no horizon up to ``t_max`` works.
    """
    goal = _checked_goal(goal, kernel)
    if not kernel.grid.is_free(start_cell):
        raise ValueError(f"start cell {start_cell} is not a free cell")
    if t_max < 2:
        raise ValueError("t_max must be at least 2")
    if goal[start_cell] > 0.0:
        return 1

    kernel_sup = kernel.support.astype(float)
    action_sup = (p_action > 0.0).astype(float)
    grid = kernel.grid

    def at_start(sup: np.ndarray) -> bool:
        row = sup[start_cell[0], start_cell[1], :]
        return bool(row.any()) if start_action is None else bool(row[start_action])

    sup = _pull_state((goal > 0.0).astype(float), kernel_sup) > 0.0
    gathers = 1
    # any backward support needs at most one sweep of the joint space
    hard_cap = grid.rows * grid.cols * N_ACTIONS + 1
    while True:
        if at_start(sup):
            return gathers + 1
        if gathers + 1 >= t_max or gathers > hard_cap:
            raise UnreachableError(
                f"no backward mass at {start_cell} within horizon {t_max}"
            )
        mixed = (sup.astype(float) @ action_sup.T) > 0.0
        nxt = _pull(mixed.astype(float), kernel_sup) > 0.0
        gathers += 1
        if np.array_equal(nxt, sup):
            raise UnreachableError(
                f"backward support reached a fixed point without touching "
                f"{start_cell}"
            )
        sup = nxt
