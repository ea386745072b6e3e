"""Closed-form solution command."""

from typing import Any

from ..scenario import Scenario, dist_stats, is_large_battery, large_battery_threshold
from ..solver import bounds_report, check_consistency, compute_params


def solve_scenario(scenario: Scenario) -> dict[str, Any]:
    """Solve for E_c and q and evaluate every closed-form bound.

    Args:
        scenario: Validated scenario

    Returns:
        Parameters, distribution statistics and bounds in bits per slot
    """
    params = compute_params(scenario)
    report = bounds_report(scenario, params)
    stats = dist_stats(scenario)

    return {
        "scenario_id": scenario.scenario_id,
        "T": scenario.T,
        "B": scenario.b_bar,
        "mu": stats.mu,
        "e_max": stats.e_max,
        "entropy_bits": stats.entropy_bits,
        "e_c": params.e_c,
        "q": params.q,
        "p": params.p,
        "p_prime": params.p_prime,
        "mu_tilde": params.mu_tilde,
        "theta_bar": report.theta_bar,
        "throughput_bounds": {
            "lower": report.throughput_lower,
            "upper": report.throughput_upper,
        },
        "capacity_bounds": {
            "lower": report.capacity_lower,
            "upper": report.capacity_upper,
            "lower_unclamped": report.capacity_lower_unclamped,
        },
        "large_battery": is_large_battery(scenario),
        "large_battery_threshold": large_battery_threshold(scenario),
        "consistency": check_consistency(scenario, params),
    }


def format_solve_report(result: dict[str, Any]) -> str:
    """Human-readable summary of ``solve_scenario`` output."""
    throughput = result["throughput_bounds"]
    capacity = result["capacity_bounds"]
    lines = [
        f"scenario {result['scenario_id']}: T={result['T']} B={result['B']:g}",
        f"  mu={result['mu']:.12g}  E_max={result['e_max']:.12g}  "
        f"H={result['entropy_bits']:.12g} bits",
        f"  E_c       = {result['e_c']:.12g}",
        f"  q         = {result['q']:.12g}",
        f"  p         = {result['p']:.12g}",
        f"  p'        = {result['p_prime']:.12g}",
        f"  mu~       = {result['mu_tilde']:.12g}",
        f"  theta_bar = {result['theta_bar']:.12g} bits/slot",
        f"  throughput in [{throughput['lower']:.12g}, {throughput['upper']:.12g}]",
        f"  capacity   in [{capacity['lower']:.12g}, {capacity['upper']:.12g}]",
    ]
    if result["large_battery"]:
        lines.append(
            f"  large battery (B >= {result['large_battery_threshold']:.12g}): "
            "theta_bar equals the AWGN capacity of the mean"
        )
    return "\n".join(lines)
