"""Verification suite: every provable claim checked against an independent oracle."""

from __future__ import annotations

import logging
from dataclasses import replace
from typing import Any

from ..config import RunConfig
from ..constants import (
    CAPACITY_GAP_CONSTANT,
    HALF_LOG2_E,
    IDENTITY_TOL,
    PolicyKind,
)
from ..oracle import (
    GridSpec,
    check_dominance,
    finite_horizon_value,
    is_shape_preserving,
    modify_semi_bernoulli,
    reward_shape_violation,
    table_shape_violation,
)
from ..policies import check_uniformization
from ..scenario import Scenario, dist_stats, is_large_battery
from ..simulator import (
    MonteCarloResult,
    check_semi_bernoulli,
    monte_carlo,
    renewal_closed_form_bound,
    renewal_series_lower_bound,
)
from ..solver import (
    PolicyParams,
    bounds_report,
    check_consistency,
    compute_params,
    epoch_identity_residual,
    epoch_stats,
    scan_critical_energy,
    theta_bar,
    verify_kkt,
)
from ..utils import awgn_rate

logger = logging.getLogger(__name__)

SCAN_TOLERANCE = 1e-6
LARGE_BATTERY_TOLERANCE = 1e-12
CAPACITY_IDENTITY_TOLERANCE = 1e-12


def _check(
    name: str, passed: bool, residual: float, detail: str = ""
) -> dict[str, Any]:
    return {
        "name": name,
        "passed": bool(passed),
        "residual": float(residual),
        "detail": detail,
    }


def check_critical_energy(scenario: Scenario, params: PolicyParams) -> dict[str, Any]:
    """Bisection root against the grid-scan oracle."""
    scanned = scan_critical_energy(scenario)
    gap = abs(params.e_c - scanned)
    return _check(
        "critical_energy",
        gap <= SCAN_TOLERANCE,
        gap,
        f"bisection {params.e_c:.12g} vs scan {scanned:.12g}",
    )


def check_parameters(scenario: Scenario, params: PolicyParams) -> dict[str, Any]:
    """Defining equation, alternate form of E_c and q in [0, 1]."""
    residuals = check_consistency(scenario, params)
    tol = IDENTITY_TOL * max(1.0, scenario.b_bar)
    failing = [name for name, value in residuals.items() if value > tol]
    return _check(
        "consistency",
        not failing,
        max(residuals.values()),
        f"failing: {', '.join(failing)}" if failing else "",
    )


def check_epoch_identity(scenario: Scenario, params: PolicyParams) -> dict[str, Any]:
    """eps / tau = q E_c whenever epochs regenerate."""
    if params.p <= 0.0:
        return _check("epoch_identity", True, 0.0, "p = 0: no regeneration, skipped")
    residual = epoch_identity_residual(epoch_stats(scenario, params), params)
    return _check(
        "epoch_identity",
        residual <= IDENTITY_TOL * max(1.0, scenario.b_bar),
        residual,
    )


def check_kkt(
    scenario: Scenario, params: PolicyParams, config: RunConfig
) -> dict[str, Any]:
    """KKT certificate of the upper-bound program."""
    certificate = verify_kkt(
        scenario, params, n_starts=config.kkt_starts, seed=config.seed
    )
    notes = list(certificate.failures)
    if certificate.trivial:
        notes.insert(0, "trivial certificate")
    if certificate.relaxed:
        notes.insert(0, "relaxed lambda0 >= 0 check (p' = 0)")
    residual = max(
        certificate.max_residual,
        abs(certificate.objective_value - certificate.theta_bar),
    )
    return _check("kkt", certificate.passed, residual, "; ".join(notes))


def check_uniformization_property(
    scenario: Scenario, config: RunConfig
) -> dict[str, Any]:
    """Uniform head allocations never earn less than the allocations they replace."""
    report = check_uniformization(
        scenario, n_samples=config.uniformization_samples, seed=config.seed
    )
    return _check(
        "uniformization",
        report.passed,
        report.worst_battery_gap,
        f"{report.violations}/{report.samples} violations, "
        f"worst reward margin {report.worst_reward_margin:.3g}",
    )


def check_dominance_horizons(
    scenario: Scenario, params: PolicyParams, config: RunConfig
) -> list[dict[str, Any]]:
    """Original arrivals dominate the modified ones, and the DP keeps its shape."""
    grid = GridSpec(n_battery=config.grid)
    checks = []
    for N in config.dominance_horizons:
        report = check_dominance(scenario, params, N, grid)
        checks.append(
            _check(
                f"dominance_N{N}",
                report.passed,
                report.max_violation,
                f"tolerance {report.tolerance:.3g}",
            )
        )

    modified = modify_semi_bernoulli(scenario, params)
    worst = reward_shape_violation(scenario, params, grid)
    for N in config.dominance_horizons:
        table = finite_horizon_value(modified, params, N, grid)
        worst = max(worst, table_shape_violation(table, scenario))
    checks.append(
        _check(
            "concavity",
            is_shape_preserving(worst),
            worst,
            "r(x, s) and modified J_N(x, s) nondecreasing and concave",
        )
    )
    return checks


def check_sandwich(
    scenario: Scenario,
    params: PolicyParams,
    mc: MonteCarloResult,
    upper: float | None = None,
) -> dict[str, Any]:
    """Policy 1 throughput lies within [theta_bar - 1/2 log2 e, theta_bar].

    ``upper`` overrides the theta_bar computed from ``params``.
    """
    if upper is None:
        upper = theta_bar(scenario, params)
    lower = upper - HALF_LOG2_E
    slack = 3.0 * mc.stderr
    excess = max(mc.mean - (upper + slack), (lower - slack) - mc.mean, 0.0)
    return _check(
        "sandwich",
        excess == 0.0,
        excess,
        f"mean {mc.mean:.6g} +- {mc.stderr:.2g} in [{lower:.6g}, {upper:.6g}]",
    )


def check_large_battery(scenario: Scenario, params: PolicyParams) -> dict[str, Any]:
    """theta_bar equals C(mu) and p = 0 beyond the large-battery threshold."""
    target = awgn_rate(dist_stats(scenario).mu)
    gap = abs(theta_bar(scenario, params) - target)
    return _check(
        "large_battery",
        params.p == 0.0 and gap <= LARGE_BATTERY_TOLERANCE,
        gap,
        f"p={params.p:.3g}, C(mu)={target:.12g}",
    )


def check_renewal_series(
    scenario: Scenario, params: PolicyParams, mc: MonteCarloResult
) -> dict[str, Any]:
    """Renewal series sits inside the throughput bounds and below the simulation."""
    upper = theta_bar(scenario, params)
    lower = upper - HALF_LOG2_E
    series = renewal_series_lower_bound(scenario, params)
    closed = renewal_closed_form_bound(scenario, params)
    tol = IDENTITY_TOL
    failures = []
    if not lower - tol <= closed <= series + tol:
        failures.append(f"closed form {closed:.12g} out of order")
    if not series <= upper + tol:
        failures.append(f"series {series:.12g} above theta_bar")
    if series > mc.mean + 3.0 * mc.stderr:
        failures.append(f"series {series:.12g} above simulated {mc.mean:.6g}")
    excess = max(series - upper, lower - closed, closed - series, 0.0)
    return _check("renewal_series", not failures, excess, "; ".join(failures))


def check_capacity_identity(scenario: Scenario, params: PolicyParams) -> dict[str, Any]:
    """Capacity bounds differ by exactly H/T + 1/2 log2(pi e^2 / 2)."""
    report = bounds_report(scenario, params)
    gap = report.capacity_upper - report.capacity_lower_unclamped
    residual = abs(gap - (report.entropy_bits / scenario.T + CAPACITY_GAP_CONSTANT))
    return _check(
        "capacity_identity", residual <= CAPACITY_IDENTITY_TOLERANCE, residual
    )


def run_verification(
    scenario: Scenario,
    config: RunConfig | None = None,
    perturb_q: float = 0.0,
) -> dict[str, Any]:
    """Run every check on one scenario.

    Args:
        scenario: Validated scenario
        config: Run configuration (the CLI configuration by default)
        perturb_q: Offset added to q in the parameters under test

    Returns:
        passed and the list of checks, each with name, passed, residual, detail
    """
    if config is None:
        from ..cli import get_config

        config = get_config()

    params = compute_params(scenario)
    upper = theta_bar(scenario, params)
    if perturb_q:
        params = replace(params, q=params.q + perturb_q)
        logger.warning(f"Verifying with q perturbed by {perturb_q:+g}")

    checks = [
        check_critical_energy(scenario, params),
        check_parameters(scenario, params),
        check_epoch_identity(scenario, params),
        check_kkt(scenario, params, config),
        check_uniformization_property(scenario, config),
    ]
    checks.extend(check_dominance_horizons(scenario, params, config))

    mc = monte_carlo(
        PolicyKind.BLOCK_FFP,
        scenario,
        n_blocks=config.verify_blocks,
        reps=config.verify_reps,
        base_seed=config.seed,
        burn_in_blocks=min(config.burn_in, config.verify_blocks),
        params=params,
        threads=config.threads,
    )
    checks.append(check_sandwich(scenario, params, mc, upper=upper))

    if is_large_battery(scenario):
        checks.append(check_large_battery(scenario, params))
    if check_semi_bernoulli(scenario, params.e_c):
        checks.append(check_renewal_series(scenario, params, mc))
    checks.append(check_capacity_identity(scenario, params))

    passed = all(check["passed"] for check in checks)
    failed = [check["name"] for check in checks if not check["passed"]]
    if failed:
        logger.info(f"Verification failed: {', '.join(failed)}")
    return {
        "scenario_id": scenario.scenario_id,
        "passed": passed,
        "checks": checks,
    }


def format_verify_report(result: dict[str, Any]) -> str:
    """One line per check: status, name, residual and detail."""
    lines = []
    for check in result["checks"]:
        status = "PASS" if check["passed"] else "FAIL"
        line = f"{status} {check['name']:<18} residual={check['residual']:.3e}"
        if check["detail"]:
            line += f"  {check['detail']}"
        lines.append(line)
    overall = "all checks passed" if result["passed"] else "verification FAILED"
    lines.append(f"{result['scenario_id']}: {overall}")
    return "\n".join(lines)
