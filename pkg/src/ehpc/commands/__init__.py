"""Command implementations behind the ehpc CLI."""

# Oracle
from .oracle import format_oracle_report, grid_from_config, run_oracle

# Simulation
from .simulate import RunRecord, run_simulation

# Closed-form solution
from .solve import format_solve_report, solve_scenario

# Sweeps
from .sweep import run_sweep, sweep_scenarios

# Verification
from .verify import format_verify_report, run_verification

__all__ = [
    # Closed-form solution
    "solve_scenario",
    "format_solve_report",
    # Simulation
    "RunRecord",
    "run_simulation",
    # Oracle
    "run_oracle",
    "format_oracle_report",
    "grid_from_config",
    # Verification
    "run_verification",
    "format_verify_report",
    # Sweeps
    "run_sweep",
    "sweep_scenarios",
]
