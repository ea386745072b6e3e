"""ehpc: online power control for energy-harvesting transmitters."""

__version__ = "0.1.0"

from .cli import main
from .config import RunConfig, load_config
from .constants import PolicyKind
from .exceptions import (
    EhpcError,
    InfeasibleAllocationError,
    NonConvergenceError,
    NoRegenerationError,
    NotSemiBernoulliError,
    PolicyViolationError,
    ScenarioError,
)
from .oracle import (
    GridSpec,
    ModifiedScenario,
    check_dominance,
    estimate_grid_slack,
    finite_horizon_value,
    modify_semi_bernoulli,
    value_iterate,
)
from .policies import make_policy, policy1_block, uniformize_block
from .scenario import (
    DiscreteDistribution,
    Scenario,
    dump_scenario,
    load_scenario,
    load_scenario_file,
)
from .simulator import monte_carlo, renewal_series_lower_bound, simulate
from .solver import (
    PolicyParams,
    bounds_report,
    capacity_bounds,
    compute_params,
    solve_critical_energy,
    theta_bar,
    throughput_bounds,
    verify_kkt,
)

__all__ = [
    "__version__",
    "main",
    "RunConfig",
    "load_config",
    "PolicyKind",
    # Errors
    "EhpcError",
    "ScenarioError",
    "PolicyViolationError",
    "InfeasibleAllocationError",
    "NoRegenerationError",
    "NotSemiBernoulliError",
    "NonConvergenceError",
    # Scenario
    "DiscreteDistribution",
    "Scenario",
    "load_scenario",
    "load_scenario_file",
    "dump_scenario",
    # Solver
    "PolicyParams",
    "solve_critical_energy",
    "compute_params",
    "theta_bar",
    "throughput_bounds",
    "capacity_bounds",
    "bounds_report",
    "verify_kkt",
    # Policies
    "make_policy",
    "policy1_block",
    "uniformize_block",
    # Simulator
    "simulate",
    "monte_carlo",
    "renewal_series_lower_bound",
    # Oracle
    "GridSpec",
    "ModifiedScenario",
    "value_iterate",
    "estimate_grid_slack",
    "modify_semi_bernoulli",
    "finite_horizon_value",
    "check_dominance",
]
