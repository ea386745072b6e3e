"""Tests for online policies and within-block uniformization."""

from __future__ import annotations

import numpy as np
import pytest

from src.ehpc import (
    InfeasibleAllocationError,
    PolicyKind,
    Scenario,
    compute_params,
    make_policy,
    policy1_block,
    uniformize_block,
)
from src.ehpc.policies import (
    BlockFfpPolicy,
    ConstantMeanPolicy,
    FixedFractionPolicy,
    GreedyPolicy,
    NaiveBlockPolicy,
    SlotContext,
    baseline_decide,
    check_uniformization,
    no_overflow_condition,
    parse_policy_kind,
    replay_block,
)


def _context(battery: float, E: float, slot: int = 1) -> SlotContext:
    return SlotContext(
        battery=battery,
        block_arrival=E,
        slot_in_block=slot,
        block_start_battery=battery,
    )


class TestPolicy1Block:
    """Tests for the Policy 1 block decision."""

    def test_small_arrival_uniform(self, bernoulli: Scenario) -> None:
        """E <= E_c spends q/T of the effective block energy on every head slot."""
        params = compute_params(bernoulli)
        decision = policy1_block(4.0, 0.0, bernoulli, params)
        assert decision.g_head == pytest.approx(0.5 / 4 * 4.0)

    def test_large_arrival_recharges(self, bernoulli: Scenario) -> None:
        """E_c < E <= B spends E - (B - b1)/(T - 1) and refills the battery."""
        params = compute_params(bernoulli)
        b1 = 8.0
        decision = policy1_block(b1, 6.0, bernoulli, params)
        assert decision.g_head == pytest.approx(6.0 - (10.0 - b1) / 3)
        end = replay_block([decision.g_head] * 3, b1, 6.0, bernoulli.b_bar)
        assert end == pytest.approx(bernoulli.b_bar)

    def test_tail_fraction(self, worked: Scenario) -> None:
        """g_T = q / (q + (1-q) T) * b_T."""
        params = compute_params(worked)
        decision = policy1_block(3.0, 1.0, worked, params)
        q = params.q
        b_T = min(3.0 + (1.0 - decision.g_head), worked.b_bar)
        assert decision.g_tail == pytest.approx(q / (q + (1 - q) * 2) * b_T)

    def test_single_slot(self, single_slot: Scenario) -> None:
        """T = 1 spends q b1."""
        params = compute_params(single_slot)
        decision = policy1_block(3.0, 4.0, single_slot, params)
        assert decision.g_tail == params.q * 3.0
        assert decision.g_head == 0.0

    def test_no_overflow_condition(self, bernoulli: Scenario) -> None:
        """(1 - 3q/4)(b1 + 3E) <= 10 with q = 1/2."""
        params = compute_params(bernoulli)
        assert no_overflow_condition(4.0, 0.0, bernoulli, params)
        assert not no_overflow_condition(10.0, 6.0, bernoulli, params)


class TestPolicies:
    """Tests for the per-slot policies."""

    def test_factory(self, worked: Scenario) -> None:
        """make_policy builds the matching class."""
        expected = {
            PolicyKind.BLOCK_FFP: BlockFfpPolicy,
            PolicyKind.FIXED_FRACTION: FixedFractionPolicy,
            PolicyKind.GREEDY: GreedyPolicy,
            PolicyKind.CONSTANT_MEAN: ConstantMeanPolicy,
            PolicyKind.NAIVE_BLOCK: NaiveBlockPolicy,
        }
        for kind, cls in expected.items():
            policy = make_policy(kind, worked)
            assert isinstance(policy, cls)
            assert policy.kind is kind

    @pytest.mark.parametrize(
        ("name", "kind"),
        [
            ("p1", PolicyKind.BLOCK_FFP),
            ("block_ffp", PolicyKind.BLOCK_FFP),
            ("FFP", PolicyKind.FIXED_FRACTION),
            ("greedy", PolicyKind.GREEDY),
            ("mean", PolicyKind.CONSTANT_MEAN),
            ("naive", PolicyKind.NAIVE_BLOCK),
        ],
    )
    def test_parse_aliases(self, name: str, kind: PolicyKind) -> None:
        """Names and aliases resolve case-insensitively."""
        assert parse_policy_kind(name) is kind

    def test_parse_unknown(self) -> None:
        """Unknown names list the valid choices."""
        with pytest.raises(ValueError, match="greedy"):
            parse_policy_kind("optimal")

    def test_greedy_spends_all(self, worked: Scenario) -> None:
        """Greedy empties the battery."""
        assert GreedyPolicy(worked).decide(_context(3.5, 1.0)) == 3.5

    def test_constant_mean_capped(self, worked: Scenario) -> None:
        """Constant-mean spends min(mu, b)."""
        policy = ConstantMeanPolicy(worked)
        assert policy.decide(_context(10.0, 1.0)) == pytest.approx(3.0)
        assert policy.decide(_context(1.0, 1.0)) == 1.0

    def test_fixed_fraction(self, worked: Scenario) -> None:
        """FFP spends E[min(E, B)]/B of the battery."""
        policy = FixedFractionPolicy(worked)
        assert policy.decide(_context(6.0, 1.0)) == pytest.approx(3.0)

    def test_policy1_caches_block_decision(self, bernoulli: Scenario) -> None:
        """Head slots reuse the decision made at slot 1."""
        policy = BlockFfpPolicy(bernoulli, compute_params(bernoulli))
        first = policy.decide(_context(8.0, 6.0, slot=1))
        ctx = SlotContext(
            battery=9.0, block_arrival=6.0, slot_in_block=2, block_start_battery=8.0
        )
        assert policy.decide(ctx) == first

    def test_policy1_tracks_recharge(self, bernoulli: Scenario) -> None:
        """Slot T of a large-arrival block records the recharge deficit."""
        policy = BlockFfpPolicy(bernoulli, compute_params(bernoulli))
        policy.decide(_context(8.0, 6.0, slot=1))
        ctx = SlotContext(
            battery=10.0, block_arrival=6.0, slot_in_block=4, block_start_battery=8.0
        )
        policy.decide(ctx)
        assert policy.large_blocks == 1
        assert policy.max_recharge_deficit == 0.0

    def test_guard_clamps(self, bernoulli: Scenario) -> None:
        """The naive block policy is clamped at the battery level."""
        policy = NaiveBlockPolicy(bernoulli, compute_params(bernoulli))
        ctx = SlotContext(
            battery=0.5, block_arrival=6.0, slot_in_block=3, block_start_battery=10.0
        )
        assert policy.decide(ctx) == 0.5
        assert policy.clamp_events == 1
        assert policy.max_clamp > 0.0

    def test_baseline_decide_matches_classes(self, worked: Scenario) -> None:
        """The stateless helper agrees with the policy classes."""
        params = compute_params(worked)
        ctx = _context(4.0, 5.0)
        baselines = (
            PolicyKind.FIXED_FRACTION,
            PolicyKind.GREEDY,
            PolicyKind.CONSTANT_MEAN,
        )
        for kind in baselines:
            policy = make_policy(kind, worked, params)
            assert baseline_decide(kind, ctx, worked, params) == policy.decide(ctx)
        with pytest.raises(ValueError):
            baseline_decide(PolicyKind.BLOCK_FFP, ctx, worked, params)

    def test_single_slot_equivalence(self, single_slot: Scenario) -> None:
        """With T = 1, Policy 1 and FFP give bitwise-identical powers."""
        params = compute_params(single_slot)
        policy1 = BlockFfpPolicy(single_slot, params)
        ffp = FixedFractionPolicy(single_slot)
        rng = np.random.Generator(np.random.Philox(key=7))
        for battery, E in zip(rng.uniform(0, 4, 500), rng.choice([0.0, 4.0], 500)):
            ctx = _context(float(battery), float(E))
            assert policy1.decide(ctx) == ffp.decide(ctx)


class TestUniformization:
    """Tests for replacing head allocations by their uniform equivalent."""

    def test_replay(self) -> None:
        """replay_block follows min(b - g + E, B)."""
        assert replay_block([1.0, 2.0], 3.0, 2.0, 5.0) == pytest.approx(4.0)

    def test_replay_rejects_overspend(self) -> None:
        """Spending more than the battery raises with the offending index."""
        with pytest.raises(InfeasibleAllocationError) as excinfo:
            replay_block([1.0, 10.0], 3.0, 2.0, 5.0)
        assert excinfo.value.index == 1

    def test_uniform_same_end_battery(self, bernoulli: Scenario) -> None:
        """The uniform allocation ends the block at the same battery level."""
        allocations = [5.0, 1.0, 3.0]
        b1, E = 7.0, 2.0
        g = uniformize_block(allocations, b1, E, bernoulli)
        original = replay_block(allocations, b1, E, bernoulli.b_bar)
        uniform = replay_block([g] * 3, b1, E, bernoulli.b_bar)
        assert uniform == pytest.approx(original, abs=1e-12)

    def test_wrong_length(self, bernoulli: Scenario) -> None:
        """Exactly T - 1 head allocations are required."""
        with pytest.raises(InfeasibleAllocationError):
            uniformize_block([1.0], 5.0, 1.0, bernoulli)

    def test_single_slot(self, single_slot: Scenario) -> None:
        """T = 1 has no head slots."""
        assert uniformize_block([], 2.0, 1.0, single_slot) == 0.0

    @pytest.mark.parametrize(
        "fixture", ["bernoulli", "worked", "three_atom", "four_atom"]
    )
    def test_property(self, fixture: str, request: pytest.FixtureRequest) -> None:
        """Random feasible allocations never beat their uniformization."""
        scenario = request.getfixturevalue(fixture)
        report = check_uniformization(scenario, n_samples=300, seed=1)
        assert report.passed
        assert report.worst_battery_gap < 1e-12
        assert report.worst_reward_margin >= -1e-9

    def test_property_single_slot(self, single_slot: Scenario) -> None:
        """T = 1 has nothing to check."""
        report = check_uniformization(single_slot, n_samples=10)
        assert report.samples == 0
        assert report.passed
