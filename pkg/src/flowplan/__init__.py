"""Grid path planning driven by forward/backward probability flows."""

from .engine import (
    FlowSet,
    MessageTensor,
    backward_flow,
    backward_step,
    backward_terminal,
    forward_final,
    forward_step,
    initial_forward,
    min_time,
    posterior,
    run_flows,
)
from .errors import (
    DeadFlowError,
    InvalidGoalError,
    KernelDegenerateError,
    NoFeasiblePathError,
    PlanningError,
    ScenarioParseError,
    UnreachableError,
)
from .grid import (
    ACTIONS,
    Action,
    GridMap,
    STILL,
    TransitionKernel,
    action_matrix,
    build_kernel,
    default_masks,
)
from .multiagent import (
    AgentSpec,
    AgentSnapshot,
    SimulationResult,
    WorldState,
    dynamic_map,
    simulate,
    step_world,
)
from .planner import (
    Path,
    Scenario,
    goal_marginal,
    greedy_plan,
    path_likelihood,
    sample_path,
    scenario_flows,
    validate_path,
)
from .render import render_frame
from .scenario_io import WorldSpec, parse_scenario, serialize_scenario

__version__ = "0.1.0"

__all__ = [
    "ACTIONS",
    "Action",
    "AgentSnapshot",
    "AgentSpec",
    "DeadFlowError",
    "FlowSet",
    "GridMap",
    "InvalidGoalError",
    "KernelDegenerateError",
    "MessageTensor",
    "NoFeasiblePathError",
    "Path",
    "PlanningError",
    "Scenario",
    "ScenarioParseError",
    "SimulationResult",
    "STILL",
    "TransitionKernel",
    "UnreachableError",
    "WorldSpec",
    "WorldState",
    "action_matrix",
    "backward_flow",
    "backward_step",
    "backward_terminal",
    "build_kernel",
    "default_masks",
    "dynamic_map",
    "forward_final",
    "forward_step",
    "goal_marginal",
    "greedy_plan",
    "initial_forward",
    "min_time",
    "parse_scenario",
    "path_likelihood",
    "posterior",
    "render_frame",
    "run_flows",
    "sample_path",
    "scenario_flows",
    "serialize_scenario",
    "simulate",
    "step_world",
    "validate_path",
]
