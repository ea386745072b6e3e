"""Tests for battery dynamics, trajectories, Monte Carlo runs and renewal series."""

from __future__ import annotations

from unittest.mock import MagicMock

import numpy as np
import pytest
from conftest import make_scenario

from src.ehpc import (
    NotSemiBernoulliError,
    PolicyKind,
    PolicyViolationError,
    Scenario,
    compute_params,
    make_policy,
    monte_carlo,
    simulate,
    theta_bar,
)
from src.ehpc.simulator import (
    check_semi_bernoulli,
    generate_arrivals,
    renewal_closed_form_bound,
    renewal_series_lower_bound,
    step_battery,
)
from src.ehpc.utils import awgn_rate


class TestStepBattery:
    """Tests for the one-slot battery update."""

    def test_no_overflow(self) -> None:
        """b - g + E below capacity is kept as is."""
        assert step_battery(5.0, 2.0, 1.0, 6.0) == (4.0, 0.0)

    def test_overflow(self) -> None:
        """Energy beyond capacity is reported as spilled."""
        battery, spilled = step_battery(5.0, 2.0, 4.0, 6.0)
        assert battery == 6.0
        assert spilled == pytest.approx(1.0)

    def test_rejects_overspend(self) -> None:
        """Spending more than the battery raises with the slot index."""
        with pytest.raises(PolicyViolationError) as excinfo:
            step_battery(5.0, 6.0, 0.0, 6.0, slot=17)
        assert excinfo.value.slot == 17
        assert "slot 17" in str(excinfo.value)

    def test_rejects_negative_power(self) -> None:
        """Negative power is infeasible."""
        with pytest.raises(PolicyViolationError):
            step_battery(5.0, -1.0, 0.0, 6.0)

    def test_rounding_slack(self) -> None:
        """Overspending by less than 1e-12 empties the battery."""
        battery, _ = step_battery(5.0, 5.0 + 1e-13, 2.0, 6.0)
        assert battery == 2.0


class TestArrivals:
    """Tests for block i.i.d. arrival sequences."""

    def test_constant_within_blocks(self, bernoulli: Scenario) -> None:
        """Every slot in a block sees the block's value."""
        arrivals = generate_arrivals(bernoulli, 200, seed=3)
        assert arrivals.shape == (800,)
        blocks = arrivals.reshape(200, 4)
        assert np.all(blocks == blocks[:, :1])

    def test_values_from_clipped_support(self, three_atom: Scenario) -> None:
        """Atoms above B arrive as B."""
        arrivals = generate_arrivals(three_atom, 500, seed=0)
        assert set(np.unique(arrivals)) <= {0.0, 2.0, 6.0}

    def test_deterministic(self, worked: Scenario) -> None:
        """The same seed gives the same stream; another seed differs."""
        first = generate_arrivals(worked, 300, seed=11)
        again = generate_arrivals(worked, 300, seed=11)
        other = generate_arrivals(worked, 300, seed=12)
        assert np.array_equal(first, again)
        assert not np.array_equal(first, other)

    def test_empirical_frequencies(self, worked: Scenario) -> None:
        """Inverse-CDF sampling matches the atom probabilities."""
        arrivals = generate_arrivals(worked, 20_000, seed=5)[::2]
        assert np.mean(arrivals == 5.0) == pytest.approx(0.5, abs=0.02)

    def test_rejects_empty(self, worked: Scenario) -> None:
        """At least one block is required."""
        with pytest.raises(ValueError):
            generate_arrivals(worked, 0, seed=0)


class TestSimulate:
    """Tests for single trajectories."""

    @pytest.mark.parametrize("kind", list(PolicyKind))
    def test_energy_conservation(self, kind: PolicyKind, three_atom: Scenario) -> None:
        """Consumed plus stored energy matches harvested minus spilled."""
        policy = make_policy(kind, three_atom)
        result = simulate(policy, three_atom, 500, seed=2)
        assert result.conservation_residual < 1e-8
        assert result.min_battery >= 0.0
        assert result.max_battery <= three_atom.b_bar

    def test_deterministic(self, worked: Scenario) -> None:
        """Equal seeds give equal rewards."""
        params = compute_params(worked)
        kind = PolicyKind.BLOCK_FFP
        first = simulate(make_policy(kind, worked, params), worked, 300, seed=4)
        again = simulate(make_policy(kind, worked, params), worked, 300, seed=4)
        assert first.total_reward_bits == again.total_reward_bits

    def test_burn_in_excluded(self, bernoulli: Scenario) -> None:
        """The average is over the measured slots only."""
        policy = make_policy(PolicyKind.GREEDY, bernoulli)
        result = simulate(policy, bernoulli, 100, seed=0, burn_in_blocks=20)
        assert result.horizon_slots == 400
        assert result.burn_in_slots == 80
        assert result.time_avg == pytest.approx(result.total_reward_bits / 400)

    def test_zero_arrivals(self, zero: Scenario) -> None:
        """Without harvesting the long-run average goes to zero."""
        policy = make_policy(PolicyKind.GREEDY, zero)
        result = simulate(policy, zero, 100, seed=0, burn_in_blocks=1)
        assert result.time_avg == 0.0

    def test_greedy_constant_arrivals(self) -> None:
        """Greedy with a constant arrival e earns C(e) per slot once settled."""
        scenario = make_scenario(1, 5.0, [(2.0, 1.0)], "constant")
        policy = make_policy(PolicyKind.GREEDY, scenario)
        result = simulate(policy, scenario, 500, seed=0, burn_in_blocks=1)
        assert result.time_avg == pytest.approx(awgn_rate(2.0), abs=1e-12)

    def test_rogue_policy_raises(self, worked: Scenario) -> None:
        """A policy that overspends stops the trajectory."""
        policy = MagicMock()
        policy.decide.return_value = 100.0
        with pytest.raises(PolicyViolationError) as excinfo:
            simulate(policy, worked, 10, seed=0)
        assert excinfo.value.slot == 1

    def test_recharge_deficit_reported(self, bernoulli: Scenario) -> None:
        """Policy 1 reports its recharge deficit; baselines report None."""
        p1 = simulate(make_policy(PolicyKind.BLOCK_FFP, bernoulli), bernoulli, 200, 0)
        greedy = simulate(make_policy(PolicyKind.GREEDY, bernoulli), bernoulli, 200, 0)
        assert p1.max_recharge_deficit is not None
        assert p1.max_recharge_deficit < 1e-9
        assert greedy.max_recharge_deficit is None


class TestMonteCarlo:
    """Tests for replicated throughput estimates."""

    def test_requires_two_reps(self, worked: Scenario) -> None:
        """A standard error needs at least two replications."""
        with pytest.raises(ValueError, match="reps"):
            monte_carlo(PolicyKind.BLOCK_FFP, worked, n_blocks=10, reps=1)

    def test_summary(self, worked: Scenario) -> None:
        """Mean and standard error come from the per-replication averages."""
        result = monte_carlo(
            PolicyKind.BLOCK_FFP,
            worked,
            n_blocks=300,
            reps=4,
            burn_in_blocks=10,
            threads=1,
        )
        assert result.reps == 4
        assert len(result.per_rep) == 4
        assert result.mean == pytest.approx(np.mean(result.per_rep))
        assert result.stderr >= 0.0
        assert result.horizon_slots == 600

    def test_seed_schedule(self, worked: Scenario) -> None:
        """Replication r uses seed base_seed + r."""
        params = compute_params(worked)
        result = monte_carlo(
            PolicyKind.GREEDY,
            worked,
            n_blocks=200,
            reps=3,
            base_seed=40,
            burn_in_blocks=0,
            params=params,
            threads=1,
        )
        policy = make_policy(PolicyKind.GREEDY, worked, params)
        single = simulate(policy, worked, 200, seed=42)
        assert result.per_rep[2] == single.time_avg

    def test_below_upper_bound(self, bernoulli: Scenario) -> None:
        """Simulated Policy 1 throughput stays below theta_bar."""
        params = compute_params(bernoulli)
        result = monte_carlo(
            PolicyKind.BLOCK_FFP,
            bernoulli,
            n_blocks=2_000,
            reps=4,
            burn_in_blocks=50,
            params=params,
            threads=1,
        )
        assert result.mean <= theta_bar(bernoulli, params) + 4 * result.stderr


class TestRenewalSeries:
    """Tests for the semi-Bernoulli renewal-reward lower bound."""

    def test_semi_bernoulli_check(self, bernoulli: Scenario, worked: Scenario) -> None:
        """Bernoulli {0, 6} qualifies; {1, 5} with E_c = 13/3 does not."""
        assert check_semi_bernoulli(bernoulli, 4.0)
        assert not check_semi_bernoulli(worked, 13 / 3)

    def test_rejects_mass_below_critical(self, worked: Scenario) -> None:
        """An atom in (0, E_c) raises with the offending value."""
        with pytest.raises(NotSemiBernoulliError) as excinfo:
            renewal_series_lower_bound(worked)
        assert excinfo.value.atom == 1.0

    def test_ordering(self, bernoulli: Scenario) -> None:
        """closed form <= series <= theta_bar."""
        params = compute_params(bernoulli)
        series = renewal_series_lower_bound(bernoulli, params)
        closed = renewal_closed_form_bound(bernoulli, params)
        assert 0.0 < closed <= series + 1e-12
        assert series <= theta_bar(bernoulli, params) + 1e-9
