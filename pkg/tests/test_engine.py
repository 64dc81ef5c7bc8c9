from __future__ import annotations

import numpy as np
import pytest

from flowplan import (
    DeadFlowError,
    GridMap,
    InvalidGoalError,
    MessageTensor,
    UnreachableError,
    action_matrix,
    backward_step,
    backward_terminal,
    build_kernel,
    forward_final,
    forward_step,
    goal_marginal,
    initial_forward,
    min_time,
    posterior,
    run_flows,
)
from flowplan.engine import BACKWARD, FORWARD
from flowplan.grid import ACTION_BY_NAME, N_ACTIONS
from flowplan.oracle import bfs_distance, dense_chain, dense_messages

from conftest import feasible_instance, random_map


def joint_delta(grid: GridMap, cell, action_index: int) -> MessageTensor:
    values = np.zeros((grid.rows, grid.cols, N_ACTIONS))
    values[cell[0], cell[1], action_index] = 1.0
    return MessageTensor(values, FORWARD)


@pytest.fixture
def empty5():
    grid = GridMap.empty(5, 5)
    return grid, build_kernel(grid), action_matrix(0.0)


def test_forward_step_still_delta_stays_put(empty5):
    grid, kernel, p = empty5
    out = forward_step(joint_delta(grid, (2, 2), 0), kernel, p)
    marginal = out.state_marginal()
    assert marginal[2, 2] == pytest.approx(1.0)
    assert np.allclose(out.values[2, 2], p[0])


def test_forward_step_is_normalized(rng):
    for _ in range(5):
        grid = random_map(rng, 4, 4, 0.2)
        if grid.free.sum() < 2:
            continue
        kernel = build_kernel(grid)
        p = action_matrix(0.0)
        values = rng.random((4, 4, N_ACTIONS)) * grid.free[:, :, None]
        values /= values.sum()
        out = forward_step(MessageTensor(values, FORWARD), kernel, p)
        assert out.values.sum() == pytest.approx(1.0, abs=1e-9)


def test_forward_step_up_delta_matches_mask(empty5):
    grid, kernel, p = empty5
    out = forward_step(joint_delta(grid, (2, 2), ACTION_BY_NAME["up"].index), kernel, p)
    marginal = out.state_marginal()
    assert marginal[1, 2] == pytest.approx(0.8)
    assert marginal[1, 1] == pytest.approx(0.095)
    assert marginal[1, 3] == pytest.approx(0.095)
    assert marginal[2, 2] == pytest.approx(0.01)
    for cell in [(1, 2), (1, 1), (1, 3), (2, 2)]:
        dist = out.values[cell] / out.values[cell].sum()
        assert np.allclose(dist, 1.0 / 9.0)


def test_forward_step_rejects_dead_input(empty5):
    grid, kernel, p = empty5
    dead = MessageTensor(np.zeros((5, 5, N_ACTIONS)), FORWARD)
    with pytest.raises(DeadFlowError):
        forward_step(dead, kernel, p)


def test_backward_step_keeps_free_support_positive(empty5):
    grid, kernel, p = empty5
    uniform = np.full((5, 5, N_ACTIONS), 1.0)
    out = backward_step(MessageTensor(uniform / uniform.sum(), BACKWARD), kernel, p)
    assert (out.values.sum(axis=2) > 0).all()


def test_backward_terminal_support_is_gatherable_neighborhood(empty5):
    grid, kernel, p = empty5
    goal = goal_marginal([(2, 2)], grid)
    b = backward_terminal(goal, kernel)
    # support is exactly the (cell, action) pairs whose stencil reaches the goal
    for i in range(5):
        for j in range(5):
            for a in range(N_ACTIONS):
                du, dv = 2 - i + 1, 2 - j + 1
                reaches = (
                    0 <= du <= 2
                    and 0 <= dv <= 2
                    and kernel.stencils[i, j, a, du, dv] > 0
                )
                assert (b.values[i, j, a] > 0) == reaches


def test_backward_terminal_is_linear_in_the_goal(empty5):
    # both goals sit on interior cells of an empty grid, so their censored
    # gathers carry equal total mass and the mixture is a plain average
    grid, kernel, p = empty5
    both = backward_terminal(goal_marginal([(1, 1), (3, 3)], grid), kernel)
    one = backward_terminal(goal_marginal([(1, 1)], grid), kernel)
    two = backward_terminal(goal_marginal([(3, 3)], grid), kernel)
    assert np.allclose(both.values, 0.5 * (one.values + two.values), atol=1e-12)


def test_backward_terminal_rejects_goal_on_obstacles():
    grid = GridMap.empty(4, 4).with_obstacles([(1, 1)])
    kernel = build_kernel(grid)
    goal = np.zeros((4, 4))
    goal[1, 1] = 1.0
    with pytest.raises(InvalidGoalError):
        backward_terminal(goal, kernel)


def test_forward_final_still_delta(empty5):
    grid, kernel, p = empty5
    marginal = forward_final(joint_delta(grid, (3, 1), 0), kernel)
    assert marginal[3, 1] == pytest.approx(1.0)
    assert marginal.sum() == pytest.approx(1.0, abs=1e-9)


def test_posterior_product_rules(empty5):
    grid, kernel, p = empty5
    f = joint_delta(grid, (2, 2), 3)
    b_vals = np.full((5, 5, N_ACTIONS), 1.0 / (25 * N_ACTIONS))
    post = posterior(f, MessageTensor(b_vals, BACKWARD))
    assert post.values[2, 2, 3] == pytest.approx(1.0)
    # disjoint supports produce a dead posterior, not an error
    b_zero = np.zeros((5, 5, N_ACTIONS))
    b_zero[0, 0, 0] = 1.0
    dead = posterior(f, MessageTensor(b_zero, BACKWARD))
    assert dead.is_dead


def test_messages_match_dense_oracle(rng):
    worst = 0.0
    for _ in range(6):
        grid, start, goal_cell, _ = feasible_instance(rng, 4, 4)
        kernel = build_kernel(grid)
        p = action_matrix(0.0)
        goal = goal_marginal([goal_cell], grid)
        horizon = int(rng.integers(2, 8))
        flows = run_flows(kernel, p, start, goal, horizon)
        dense = dense_messages(dense_chain(kernel, p), start, goal, horizon)
        for t in range(horizon - 1):
            worst = max(worst, np.abs(flows.forward[t].values - dense.forward[t]).max())
            worst = max(worst, np.abs(flows.backward[t].values - dense.backward[t]).max())
            worst = max(worst, np.abs(flows.posterior[t].values - dense.posterior[t]).max())
        worst = max(worst, np.abs(flows.forward_final - dense.forward_final).max())
        worst = max(worst, np.abs(flows.posterior_final - dense.posterior_final).max())
    assert worst <= 1e-12


def test_run_flows_posterior_support_lies_on_geodesics():
    grid = GridMap.empty(5, 5)
    kernel = build_kernel(grid)
    p = action_matrix(0.0)
    goal = goal_marginal([(4, 4)], grid)
    flows = run_flows(kernel, p, (0, 0), goal, 5)
    for t in range(1, 5):
        marginal = flows.posterior[t - 1].state_marginal()
        assert marginal.sum() > 0
        for i, j in np.argwhere(marginal > 0):
            d_start = bfs_distance(grid, (0, 0), [(int(i), int(j))])
            d_goal = bfs_distance(grid, (int(i), int(j)), [(4, 4)])
            assert d_start <= t - 1
            assert d_goal <= 5 - t


def test_run_flows_t2_adjacent_support():
    grid = GridMap.empty(4, 4)
    kernel = build_kernel(grid)
    flows = run_flows(kernel, action_matrix(0.0), (0, 0), goal_marginal([(1, 1)], grid), 2)
    support = np.argwhere(flows.posterior[0].values > 0)
    assert {tuple(map(int, s[:2])) for s in support} == {(0, 0)}
    names = {int(a) for *_, a in support}
    assert names == {
        ACTION_BY_NAME["right"].index,
        ACTION_BY_NAME["down-right"].index,
        ACTION_BY_NAME["down"].index,
    }


def test_run_flows_walled_start_gives_dead_posteriors():
    grid = GridMap.empty(5, 5).with_obstacles(
        [(0, 1), (1, 0), (1, 1)]  # pen the start corner in
    )
    kernel = build_kernel(grid)
    flows = run_flows(
        kernel, action_matrix(0.0), (0, 0), goal_marginal([(4, 4)], grid), 7
    )
    assert all(post.is_dead for post in flows.posterior)
    assert flows.posterior_final.sum() == 0.0


def test_run_flows_forward_normalization_and_support(rng):
    for _ in range(4):
        grid, start, goal_cell, d = feasible_instance(rng, 5, 5)
        kernel = build_kernel(grid)
        p = action_matrix(0.0)
        flows = run_flows(kernel, p, start, goal_marginal([goal_cell], grid), d + 2)
        blocked = ~grid.free
        for f in flows.forward:
            assert abs(f.values.sum() - 1.0) <= 1e-9
            assert not f.values[blocked].any()
        for b in flows.backward:
            assert not b.values[blocked].any()
        for q in flows.posterior:
            assert not q.values[blocked].any()
        assert not flows.forward_final[blocked].any()


def test_min_time_start_on_goal_is_one():
    grid = GridMap.empty(3, 3)
    kernel = build_kernel(grid)
    assert min_time(kernel, action_matrix(0.0), (1, 1), goal_marginal([(1, 1)], grid), 10) == 1


def test_min_time_empty_5x5_corner_to_corner():
    grid = GridMap.empty(5, 5)
    kernel = build_kernel(grid)
    assert min_time(kernel, action_matrix(0.0), (0, 0), goal_marginal([(4, 4)], grid), 100) == 5


def test_min_time_unreachable_goal():
    grid = GridMap.empty(5, 5).with_obstacles(
        [(1, 1), (1, 2), (1, 3), (2, 1), (2, 3), (3, 1), (3, 2), (3, 3)]
    )
    kernel = build_kernel(grid)
    with pytest.raises(UnreachableError):
        min_time(kernel, action_matrix(0.0), (0, 0), goal_marginal([(2, 2)], grid), 50)


def test_min_time_respects_the_bound():
    grid = GridMap.empty(6, 6)
    kernel = build_kernel(grid)
    goal = goal_marginal([(5, 5)], grid)
    with pytest.raises(UnreachableError):
        min_time(kernel, action_matrix(0.0), (0, 0), goal, 4)


def test_min_time_matches_bfs(rng):
    for _ in range(15):
        grid, start, goal_cell, d = feasible_instance(rng, 8, 8)
        kernel = build_kernel(grid)
        goal = goal_marginal([goal_cell], grid)
        assert min_time(kernel, action_matrix(0.0), start, goal, 300) == d + 1


def test_min_time_with_pinned_still_action_needs_one_extra_slice():
    grid = GridMap.empty(5, 5)
    kernel = build_kernel(grid)
    goal = goal_marginal([(4, 4)], grid)
    free = min_time(kernel, action_matrix(0.0), (0, 0), goal, 100)
    pinned = min_time(kernel, action_matrix(0.0), (0, 0), goal, 100, start_action=0)
    assert free == 5 and pinned == 6


def test_increasing_horizon_preserves_feasibility(rng):
    grid, start, goal_cell, d = feasible_instance(rng, 6, 6)
    kernel = build_kernel(grid)
    p = action_matrix(0.0)
    goal = goal_marginal([goal_cell], grid)
    for horizon in (d + 1, d + 3, d + 5):
        flows = run_flows(kernel, p, start, goal, horizon)
        assert not flows.posterior[0].is_dead


def test_initial_forward_validates_inputs():
    grid = GridMap.empty(3, 3).with_obstacles([(0, 0)])
    kernel = build_kernel(grid)
    with pytest.raises(ValueError):
        initial_forward(kernel, (0, 0))
    with pytest.raises(ValueError):
        initial_forward(kernel, (1, 1), np.zeros(N_ACTIONS))


def test_messages_match_dense_oracle_with_stiffness(rng):
    # a stiff action matrix is asymmetric under transposition, so this
    # catches action-mixing bugs the uniform matrix would hide
    worst = 0.0
    for _ in range(4):
        grid, start, goal_cell, _ = feasible_instance(rng, 4, 4)
        kernel = build_kernel(grid)
        p = action_matrix(0.7)
        goal = goal_marginal([goal_cell], grid)
        horizon = int(rng.integers(3, 7))
        flows = run_flows(kernel, p, start, goal, horizon)
        dense = dense_messages(dense_chain(kernel, p), start, goal, horizon)
        for t in range(horizon - 1):
            worst = max(worst, np.abs(flows.forward[t].values - dense.forward[t]).max())
            worst = max(worst, np.abs(flows.backward[t].values - dense.backward[t]).max())
            worst = max(worst, np.abs(flows.posterior[t].values - dense.posterior[t]).max())
    assert worst <= 1e-12


def test_messages_match_dense_oracle_with_pinned_start_action(rng):
    grid, start, goal_cell, _ = feasible_instance(rng, 4, 4)
    kernel = build_kernel(grid)
    p = action_matrix(0.3)
    goal = goal_marginal([goal_cell], grid)
    pi = np.zeros(N_ACTIONS)
    pi[5] = 1.0  # down
    flows = run_flows(kernel, p, start, goal, 5, start_actions=pi)
    dense = dense_messages(dense_chain(kernel, p), start, goal, 5, start_actions=pi)
    for t in range(4):
        assert np.abs(flows.forward[t].values - dense.forward[t]).max() <= 1e-12
        assert np.abs(flows.backward[t].values - dense.backward[t]).max() <= 1e-12


def test_partial_initial_action_distribution_matches_oracle(rng):
    grid, start, goal_cell, _ = feasible_instance(rng, 4, 4)
    kernel = build_kernel(grid)
    p = action_matrix(0.2)
    goal = goal_marginal([goal_cell], grid)
    pi = np.zeros(N_ACTIONS)
    pi[0] = 0.5
    pi[3] = 0.25
    pi[5] = 0.25
    flows = run_flows(kernel, p, start, goal, 4, start_actions=pi)
    dense = dense_messages(dense_chain(kernel, p), start, goal, 4, start_actions=pi)
    for t in range(3):
        assert np.abs(flows.forward[t].values - dense.forward[t]).max() <= 1e-12
        assert np.abs(flows.posterior[t].values - dense.posterior[t]).max() <= 1e-12
