"""End-to-end acceptance tests.

These run long simulations and full value iterations, so they are marked as
integration tests and carry their own timeouts. Most of them are driven over
the acceptance matrix in conftest.py.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import replace

import pytest
from conftest import make_scenario, matrix_member

from src.ehpc import (
    GridSpec,
    PolicyKind,
    Scenario,
    check_dominance,
    compute_params,
    estimate_grid_slack,
    main,
    make_policy,
    monte_carlo,
    renewal_series_lower_bound,
    simulate,
    theta_bar,
    value_iterate,
    verify_kkt,
)
from src.ehpc.constants import HALF_LOG2_E
from src.ehpc.simulator import MonteCarloResult, check_semi_bernoulli
from src.ehpc.utils import awgn_rate

MC_BLOCKS = 10_000
MC_REPS = 16
VI_GRID = GridSpec(n_battery=129, n_action=33)


def _run(kind: PolicyKind, scenario: Scenario, threads: int = 1) -> MonteCarloResult:
    return monte_carlo(
        kind,
        scenario,
        n_blocks=MC_BLOCKS,
        reps=MC_REPS,
        burn_in_blocks=500,
        threads=threads,
    )


@pytest.mark.integration
class TestThroughputSandwich:
    """Policy 1 lands within 1/2 log2 e of theta_bar."""

    @pytest.mark.timeout(600)
    def test_sandwich(self, matrix_scenario: Scenario) -> None:
        """theta_bar - 1/2 log2 e <= simulated Policy 1 <= theta_bar."""
        upper = theta_bar(matrix_scenario, compute_params(matrix_scenario))
        result = _run(PolicyKind.BLOCK_FFP, matrix_scenario)
        slack = 3 * result.stderr
        assert upper - HALF_LOG2_E - slack <= result.mean <= upper + slack

    @pytest.mark.timeout(600)
    def test_policy1_is_admissible(self, matrix_scenario: Scenario) -> None:
        """Policy 1 never asks for more than the battery holds."""
        params = compute_params(matrix_scenario)
        for seed in range(4):
            policy = make_policy(PolicyKind.BLOCK_FFP, matrix_scenario, params)
            result = simulate(policy, matrix_scenario, 2_000, seed=seed)
            assert policy.max_clamp <= 1e-12
            assert result.max_recharge_deficit is not None
            assert result.max_recharge_deficit < 1e-9

    @pytest.mark.timeout(600)
    def test_renewal_series_lower_bounds_simulation(
        self, matrix_scenario: Scenario
    ) -> None:
        """For semi-Bernoulli arrivals the series never exceeds Policy 1."""
        params = compute_params(matrix_scenario)
        if params.p <= 0.0 or not check_semi_bernoulli(matrix_scenario, params.e_c):
            pytest.skip("renewal series needs semi-Bernoulli arrivals with p > 0")
        series = renewal_series_lower_bound(matrix_scenario, params)
        result = _run(PolicyKind.BLOCK_FFP, matrix_scenario)
        assert series <= result.mean + 3 * result.stderr

    @pytest.mark.timeout(600)
    def test_single_slot_policy1_is_ffp(self, single_slot: Scenario) -> None:
        """With T = 1 both policies produce identical replications."""
        params = compute_params(single_slot)
        kwargs = {"n_blocks": 5_000, "reps": 4, "params": params, "threads": 1}
        p1 = monte_carlo(PolicyKind.BLOCK_FFP, single_slot, **kwargs)
        ffp = monte_carlo(PolicyKind.FIXED_FRACTION, single_slot, **kwargs)
        assert p1.per_rep == ffp.per_rep

    @pytest.mark.timeout(600)
    @pytest.mark.parametrize("scenario_id", ["single_slot", "single_slot_spread"])
    def test_single_slot_bound(self, scenario_id: str) -> None:
        """Fixed fraction earns at least C(E[min(E, B)]) - 1/2 log2 e."""
        scenario = matrix_member(scenario_id)
        result = _run(PolicyKind.FIXED_FRACTION, scenario)
        target = awgn_rate(scenario.clipped.expected_min(scenario.b_bar))
        assert result.mean >= target - HALF_LOG2_E - 3 * result.stderr

    @pytest.mark.timeout(600)
    @pytest.mark.parametrize(
        "args",
        [
            (4, 10.0, [(0.0, 0.5), (6.0, 0.5)]),
            (8, 20.0, [(0.0, 0.5), (4.0, 0.5)]),
        ],
    )
    def test_policy1_beats_greedy(
        self, args: tuple[int, float, list[tuple[float, float]]]
    ) -> None:
        """With long blocks and a roomy battery Policy 1 outperforms greedy."""
        scenario = make_scenario(*args)
        p1 = _run(PolicyKind.BLOCK_FFP, scenario)
        greedy = _run(PolicyKind.GREEDY, scenario)
        assert p1.mean >= greedy.mean - 3 * p1.stderr

    @pytest.mark.timeout(600)
    def test_parallel_matches_serial(self, worked: Scenario) -> None:
        """Worker processes merge replications in seed order."""
        serial = _run(PolicyKind.BLOCK_FFP, worked, threads=1)
        parallel = _run(PolicyKind.BLOCK_FFP, worked, threads=2)
        assert parallel.per_rep == serial.per_rep
        assert (parallel.mean, parallel.stderr) == (serial.mean, serial.stderr)


@pytest.mark.integration
class TestValueIterationBracket:
    """The optimal gain sits between the closed-form bounds."""

    @pytest.mark.timeout(600)
    def test_bracket(self, matrix_scenario: Scenario) -> None:
        """theta_bar - 1/2 log2 e - delta <= theta_vi <= theta_bar + delta."""
        result = value_iterate(matrix_scenario, VI_GRID)
        slack = estimate_grid_slack(matrix_scenario, VI_GRID, coarse=result.theta_vi)
        upper = theta_bar(matrix_scenario, compute_params(matrix_scenario))
        delta = slack.delta
        assert delta < 0.02
        assert upper - HALF_LOG2_E - delta <= result.theta_vi <= upper + delta

    @pytest.mark.timeout(900)
    def test_large_battery_gain_approaches_capacity(
        self, large_battery: Scenario
    ) -> None:
        """The gain stays below C(mu) and climbs toward it as B grows."""
        capacity = awgn_rate(large_battery.clipped.mean)
        gains = []
        for b_bar in (6.0, 12.0, 24.0):
            scenario = replace(large_battery, b_bar=b_bar)
            result = value_iterate(scenario, VI_GRID)
            slack = estimate_grid_slack(scenario, VI_GRID, coarse=result.theta_vi)
            assert result.theta_vi <= capacity + slack.delta
            gains.append(result.theta_vi)

        assert gains == sorted(gains)
        assert capacity - gains[-1] < (capacity - gains[0]) / 2
        assert capacity - gains[-1] < 0.01


@pytest.mark.integration
class TestDominance:
    """Original arrivals dominate their semi-Bernoulli modification."""

    @pytest.mark.timeout(600)
    @pytest.mark.parametrize("N", [1, 2, 4, 8])
    def test_horizons(self, N: int, matrix_scenario: Scenario) -> None:
        """J_N >= modified J_N on a 257-point grid; N = 1 is exact."""
        params = compute_params(matrix_scenario)
        report = check_dominance(matrix_scenario, params, N, GridSpec(n_battery=257))
        assert report.passed, report
        if N == 1:
            assert report.max_violation == 0.0


@pytest.mark.integration
class TestKktCertificate:
    """The closed-form optimum of the upper-bound program is certified."""

    @pytest.mark.timeout(600)
    def test_certificate(self, matrix_scenario: Scenario) -> None:
        """Stationarity, multiplier signs, objective and a 50-start ascent."""
        params = compute_params(matrix_scenario)
        certificate = verify_kkt(matrix_scenario, params, n_starts=50)
        assert certificate.passed, certificate.failures
        assert certificate.objective_value == pytest.approx(
            certificate.theta_bar, abs=1e-9
        )
        if params.p_prime > 0.0:
            assert not certificate.relaxed
            assert certificate.lambda0 > 0.0
            assert certificate.max_residual < 1e-9
            assert all(value >= 0.0 for value in certificate.lambda1.values())


@pytest.mark.integration
class TestVerifySuite:
    """The full verification suite through the command line."""

    @pytest.mark.timeout(900)
    @pytest.mark.parametrize("stem", ["bernoulli", "three_atom", "large_battery"])
    def test_verify_passes(
        self,
        stem: str,
        sample_path: Callable[[str], str],
        capsys: pytest.CaptureFixture[str],
    ) -> None:
        """Every check passes on the sample scenarios."""
        argv = ["verify", sample_path(stem), "--threads", "1", "--grid", "129"]
        code = main(argv)
        out = capsys.readouterr().out
        assert code == 0, out
        assert "all checks passed" in out
