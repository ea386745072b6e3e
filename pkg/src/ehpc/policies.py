"""Online power control policies and within-block uniformization."""

from __future__ import annotations

import logging
from abc import ABC, abstractmethod
from collections.abc import Sequence
from dataclasses import dataclass

import numpy as np

from .constants import (
    CLAMP_LOG_THRESHOLD,
    DEFAULT_UNIFORMIZATION_SAMPLES,
    ENERGY_ATOL,
    FEASIBILITY_TOL,
    POLICY_ALIASES,
    PolicyKind,
)
from .exceptions import InfeasibleAllocationError
from .scenario import Scenario
from .solver import PolicyParams, compute_params, fixed_fraction_q
from .utils import awgn_rate

logger = logging.getLogger(__name__)


@dataclass
class SlotContext:
    """Information available to an online policy at one slot."""

    battery: float
    block_arrival: float
    slot_in_block: int
    block_start_battery: float


@dataclass(frozen=True)
class BlockDecision:
    """Powers for slots 1..T-1 (``g_head``) and slot T (``g_tail``) of a block."""

    g_head: float
    g_tail: float


@dataclass(frozen=True)
class UniformizationReport:
    """Outcome of the uniformization property check."""

    samples: int
    violations: int
    worst_reward_margin: float
    worst_battery_gap: float

    @property
    def passed(self) -> bool:
        return self.violations == 0


def policy1_block(
    b1: float, E: float, scenario: Scenario, params: PolicyParams
) -> BlockDecision:
    """Policy 1 decision for a block starting with battery b1 and arrival E.

    Args:
        b1: Battery at the first slot of the block.
        E: Block arrival (clipped).
        scenario: Validated scenario.
        params: Solved parameters.

    Returns:
        BlockDecision; for T = 1 only ``g_tail`` is used and equals q b1.
    """
    T = scenario.T
    b_bar = scenario.b_bar
    q = params.q
    if T == 1:
        return BlockDecision(g_head=0.0, g_tail=q * b1)

    if E <= params.e_c + ENERGY_ATOL:
        g_head = q / T * (b1 + (T - 1) * E)
    elif E <= b_bar:
        g_head = E - (b_bar - b1) / (T - 1)
    else:
        g_head = b_bar

    b_T = min(b1 + (T - 1) * (E - g_head), b_bar)
    g_tail = q / (q + (1.0 - q) * T) * b_T
    return BlockDecision(g_head=g_head, g_tail=g_tail)


def no_overflow_condition(
    b1: float, E: float, scenario: Scenario, params: PolicyParams
) -> bool:
    """Whether (1 - (T-1)q/T)(b1 + (T-1)E) <= B: the uniform head never spills."""
    T = scenario.T
    effective = b1 + (T - 1) * E
    return (1.0 - (T - 1) * params.q / T) * effective <= scenario.b_bar + ENERGY_ATOL


class Policy(ABC):
    """Per-slot online power control."""

    kind: PolicyKind

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.clamp_events = 0
        self.max_clamp = 0.0

    @abstractmethod
    def decide(self, ctx: SlotContext) -> float:
        """Return the transmit power for the slot described by ``ctx``."""

    def _guard(self, g: float, battery: float, slot: int) -> float:
        clamped = min(max(g, 0.0), battery)
        excess = abs(clamped - g)
        if excess > 0.0:
            self.clamp_events += 1
            self.max_clamp = max(self.max_clamp, excess)
            if excess > CLAMP_LOG_THRESHOLD:
                logger.info(
                    f"{self.kind.value}: clamped power {g!r} to {clamped!r} "
                    f"at slot {slot}"
                )
        return clamped


class BlockFfpPolicy(Policy):
    """Policy 1: fixed fraction of the effective block energy."""

    kind = PolicyKind.BLOCK_FFP

    def __init__(self, scenario: Scenario, params: PolicyParams):
        super().__init__(scenario)
        self.params = params
        self.decision: BlockDecision | None = None
        self.max_recharge_deficit = 0.0
        self.large_blocks = 0

    def decide(self, ctx: SlotContext) -> float:
        T = self.scenario.T
        if ctx.slot_in_block == 1 or self.decision is None:
            self.decision = policy1_block(
                ctx.block_start_battery, ctx.block_arrival, self.scenario, self.params
            )

        if ctx.slot_in_block < T:
            g = self.decision.g_head
        else:
            if T > 1 and ctx.block_arrival > self.params.e_c + ENERGY_ATOL:
                self.large_blocks += 1
                deficit = self.scenario.b_bar - ctx.battery
                self.max_recharge_deficit = max(self.max_recharge_deficit, deficit)
            g = self.decision.g_tail
        return self._guard(g, ctx.battery, ctx.slot_in_block)


class FixedFractionPolicy(Policy):
    """Spend the fraction q_iid of the battery every slot."""

    kind = PolicyKind.FIXED_FRACTION

    def __init__(self, scenario: Scenario):
        super().__init__(scenario)
        self.q = fixed_fraction_q(scenario)

    def decide(self, ctx: SlotContext) -> float:
        return self._guard(self.q * ctx.battery, ctx.battery, ctx.slot_in_block)


class GreedyPolicy(Policy):
    """Spend the whole battery every slot."""

    kind = PolicyKind.GREEDY

    def decide(self, ctx: SlotContext) -> float:
        return ctx.battery


class ConstantMeanPolicy(Policy):
    """Spend the mean arrival whenever the battery allows it."""

    kind = PolicyKind.CONSTANT_MEAN

    def __init__(self, scenario: Scenario):
        super().__init__(scenario)
        self.mu = scenario.clipped.mean

    def decide(self, ctx: SlotContext) -> float:
        return min(self.mu, ctx.battery)


class NaiveBlockPolicy(Policy):
    """Uniform (q/T)(b1 + (T-1)E) on every slot, without overflow protection."""

    kind = PolicyKind.NAIVE_BLOCK

    def __init__(self, scenario: Scenario, params: PolicyParams):
        super().__init__(scenario)
        self.params = params

    def decide(self, ctx: SlotContext) -> float:
        T = self.scenario.T
        g = self.params.q / T * (ctx.block_start_battery + (T - 1) * ctx.block_arrival)
        return self._guard(g, ctx.battery, ctx.slot_in_block)


def baseline_decide(
    kind: PolicyKind, ctx: SlotContext, scenario: Scenario, params: PolicyParams
) -> float:
    """Stateless per-slot decision of a baseline policy."""
    if kind is PolicyKind.FIXED_FRACTION:
        return fixed_fraction_q(scenario) * ctx.battery
    if kind is PolicyKind.GREEDY:
        return ctx.battery
    if kind is PolicyKind.CONSTANT_MEAN:
        return min(scenario.clipped.mean, ctx.battery)
    if kind is PolicyKind.NAIVE_BLOCK:
        T = scenario.T
        g = params.q / T * (ctx.block_start_battery + (T - 1) * ctx.block_arrival)
        return min(g, ctx.battery)
    raise ValueError(f"{kind.value} is not a baseline policy")


def parse_policy_kind(name: str) -> PolicyKind:
    """Resolve a policy name or alias (case-insensitive)."""
    key = name.strip().lower()
    if key in POLICY_ALIASES:
        return POLICY_ALIASES[key]
    try:
        return PolicyKind(key)
    except ValueError:
        choices = sorted({k.value for k in PolicyKind} | set(POLICY_ALIASES))
        raise ValueError(
            f"unknown policy '{name}' (choose from {', '.join(choices)})"
        ) from None


def make_policy(
    kind: PolicyKind, scenario: Scenario, params: PolicyParams | None = None
) -> Policy:
    """Construct a fresh policy instance for one trajectory."""
    if kind is PolicyKind.BLOCK_FFP:
        return BlockFfpPolicy(scenario, params or compute_params(scenario))
    if kind is PolicyKind.FIXED_FRACTION:
        return FixedFractionPolicy(scenario)
    if kind is PolicyKind.GREEDY:
        return GreedyPolicy(scenario)
    if kind is PolicyKind.CONSTANT_MEAN:
        return ConstantMeanPolicy(scenario)
    return NaiveBlockPolicy(scenario, params or compute_params(scenario))


def replay_block(
    allocations: Sequence[float], b1: float, E: float, b_bar: float
) -> float:
    """Battery at slot T after spending ``allocations`` on slots 1..T-1.

    Raises:
        InfeasibleAllocationError: If a power is negative or exceeds the battery.
    """
    battery = b1
    for index, g in enumerate(allocations):
        if g < -FEASIBILITY_TOL or g > battery + FEASIBILITY_TOL:
            raise InfeasibleAllocationError(
                f"power {g!r} infeasible with battery {battery!r}", index
            )
        battery = min(battery - g + E, b_bar)
    return battery


def uniformize_block(
    allocations: Sequence[float], b1: float, E: float, scenario: Scenario
) -> float:
    """Uniform head power with the same end-of-block battery as ``allocations``.

    Args:
        allocations: Feasible powers for slots 1..T-1.
        b1: Battery at slot 1.
        E: Block arrival.
        scenario: Validated scenario.

    Returns:
        min(E - (b_T - b1) / (T - 1), B); 0.0 when T = 1.
    """
    T = scenario.T
    if len(allocations) != T - 1:
        raise InfeasibleAllocationError(
            f"expected {T - 1} head allocations, got {len(allocations)}"
        )
    if T == 1:
        return 0.0
    E = min(E, scenario.b_bar)
    b_T = replay_block(allocations, b1, E, scenario.b_bar)
    return min(E - (b_T - b1) / (T - 1), scenario.b_bar)


def check_uniformization(
    scenario: Scenario,
    n_samples: int = DEFAULT_UNIFORMIZATION_SAMPLES,
    seed: int = 0,
) -> UniformizationReport:
    """Compare random feasible head allocations against their uniformization.

    Blocks start from reachable states (b1 >= E). A sample is a violation when
    the uniform allocation is infeasible, earns less, or ends the block with a
    different battery level.
    """
    T = scenario.T
    if T == 1:
        return UniformizationReport(0, 0, 0.0, 0.0)

    b_bar = scenario.b_bar
    clipped = scenario.clipped
    rng = np.random.Generator(np.random.Philox(key=seed))
    tol = FEASIBILITY_TOL * max(1.0, b_bar)

    violations = 0
    worst_margin = np.inf
    worst_gap = 0.0
    arrivals = rng.choice(clipped.values, size=n_samples, p=clipped.probs)
    for E in arrivals:
        E = float(E)
        b1 = float(rng.uniform(E, b_bar))
        battery = b1
        allocations: list[float] = []
        for _ in range(T - 1):
            g = float(rng.uniform()) * battery
            allocations.append(g)
            battery = min(battery - g + E, b_bar)
        reward = sum(awgn_rate(g) for g in allocations)

        g_uniform = uniformize_block(allocations, b1, E, scenario)
        try:
            uniform_end = replay_block([g_uniform] * (T - 1), b1, E, b_bar)
        except InfeasibleAllocationError:
            violations += 1
            continue

        margin = (T - 1) * awgn_rate(g_uniform) - reward
        gap = abs(uniform_end - battery)
        worst_margin = min(worst_margin, margin)
        worst_gap = max(worst_gap, gap)
        if margin < -tol or gap > tol:
            violations += 1

    if violations:
        logger.warning(f"Uniformization violated on {violations}/{n_samples} blocks")
    return UniformizationReport(
        samples=n_samples,
        violations=violations,
        worst_reward_margin=float(worst_margin) if n_samples else 0.0,
        worst_battery_gap=worst_gap,
    )
