"""Value-iteration oracle command."""

from typing import Any

from ..config import RunConfig
from ..oracle import GridSpec, estimate_grid_slack, value_iterate
from ..scenario import Scenario, dist_stats, is_large_battery
from ..solver import compute_params, throughput_bounds
from ..utils import awgn_rate


def grid_from_config(config: RunConfig) -> GridSpec:
    """GridSpec built from the run configuration."""
    return GridSpec(
        n_battery=config.grid,
        n_action=config.n_action,
        vi_tolerance=config.vi_tol,
        max_iter=config.vi_max_iter,
    )


def run_oracle(
    scenario: Scenario, config: RunConfig | None = None, with_slack: bool = True
) -> dict[str, Any]:
    """Solve the discretized MDP and bracket its gain with the closed-form bounds.

    Args:
        scenario: Validated scenario
        config: Run configuration (the CLI configuration by default)
        with_slack: Also solve the doubled grid to measure the discretization slack

    Returns:
        theta_vi, convergence details, delta_grid and the bracket check

    Raises:
        NonConvergenceError: If value iteration hits its iteration cap
    """
    if config is None:
        from ..cli import get_config

        config = get_config()

    grid = grid_from_config(config)
    result = value_iterate(scenario, grid)
    params = compute_params(scenario)
    lower, upper = throughput_bounds(scenario, params)

    delta = grid.vi_tolerance
    theta_fine = None
    if with_slack:
        slack = estimate_grid_slack(scenario, grid, coarse=result.theta_vi)
        delta = slack.delta
        theta_fine = slack.theta_fine

    output: dict[str, Any] = {
        "scenario_id": scenario.scenario_id,
        "T": scenario.T,
        "B": scenario.b_bar,
        "theta_vi": result.theta_vi,
        "span": result.span,
        "iterations": result.iterations,
        "n_battery": grid.n_battery,
        "n_action": grid.n_action,
        "theta_vi_fine": theta_fine,
        "delta_grid": delta,
        "theta_bar": upper,
        "lower_bound": lower,
        "bracket_ok": lower - delta <= result.theta_vi <= upper + delta,
    }
    if is_large_battery(scenario):
        output["awgn_capacity"] = awgn_rate(dist_stats(scenario).mu)
    return output


def format_oracle_report(result: dict[str, Any]) -> str:
    """Human-readable summary of ``run_oracle`` output."""
    lines = [
        f"scenario {result['scenario_id']}: T={result['T']} B={result['B']:g}",
        f"  theta_vi   = {result['theta_vi']:.12g} bits/slot "
        f"({result['iterations']} iterations, span {result['span']:.3g})",
        f"  delta_grid = {result['delta_grid']:.3g} "
        f"(grid {result['n_battery']} x {result['n_action']})",
        f"  bounds     = [{result['lower_bound']:.12g}, {result['theta_bar']:.12g}]",
        f"  bracket    = {'ok' if result['bracket_ok'] else 'VIOLATED'}",
    ]
    if "awgn_capacity" in result:
        lines.append(f"  C(mu)      = {result['awgn_capacity']:.12g}")
    return "\n".join(lines)
