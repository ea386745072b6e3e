"""Block i.i.d. arrivals, battery dynamics, Monte Carlo runs and renewal series."""

from __future__ import annotations

import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .constants import (
    DEFAULT_BLOCKS,
    DEFAULT_BURN_IN,
    DEFAULT_REPS,
    DEFAULT_SEED,
    ENERGY_ATOL,
    FEASIBILITY_TOL,
    SERIES_TAIL_TOL,
    PolicyKind,
)
from .exceptions import NotSemiBernoulliError, PolicyViolationError
from .policies import BlockFfpPolicy, Policy, SlotContext, make_policy
from .scenario import Scenario
from .solver import PolicyParams, compute_params
from .utils import awgn_rate, awgn_rate_array, resolve_threads

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrajectoryResult:
    """One simulated trajectory; reward fields exclude the burn-in slots."""

    horizon_slots: int
    total_reward_bits: float
    time_avg: float
    overflow_events: int
    seed: int
    burn_in_slots: int = 0
    harvested: float = 0.0
    consumed: float = 0.0
    overflowed: float = 0.0
    initial_battery: float = 0.0
    final_battery: float = 0.0
    min_battery: float = 0.0
    max_battery: float = 0.0
    clamp_events: int = 0
    max_recharge_deficit: float | None = None

    @property
    def conservation_residual(self) -> float:
        """|consumed + final - initial - (harvested - overflowed)|."""
        return abs(
            self.consumed
            + self.final_battery
            - self.initial_battery
            - (self.harvested - self.overflowed)
        )


@dataclass(frozen=True)
class MonteCarloResult:
    """Replicated estimate of the long-term average throughput."""

    mean: float
    stderr: float
    reps: int
    horizon_slots: int
    burn_in_slots: int
    per_rep: tuple[float, ...] = ()
    overflow_events: int = 0
    max_recharge_deficit: float | None = None


def step_battery(
    b: float, g: float, E_next: float, b_bar: float, slot: int | None = None
) -> tuple[float, float]:
    """Advance the battery by one slot.

    Args:
        b: Battery at the current slot.
        g: Power spent in the current slot.
        E_next: Energy arriving for the next slot.
        b_bar: Battery capacity.
        slot: Slot index reported on violations.

    Returns:
        (min(b - g + E_next, B), energy lost to overflow).

    Raises:
        PolicyViolationError: If g is negative or exceeds b by more than 1e-12.
    """
    if g > b + FEASIBILITY_TOL or g < -FEASIBILITY_TOL:
        raise PolicyViolationError(
            f"infeasible power {g!r} with battery {b!r}"
            + (f" at slot {slot}" if slot is not None else ""),
            slot,
        )
    level = max(b - g, 0.0) + E_next
    if level > b_bar:
        return b_bar, level - b_bar
    return level, 0.0


def generate_arrivals(
    scenario: Scenario, n_blocks: int, seed: int
) -> NDArray[np.float64]:
    """Per-slot arrival sequence for ``n_blocks`` blocks.

    Block values are drawn by inverse CDF from a Philox stream keyed by
    ``seed``; draw i belongs to block i.
    """
    if n_blocks < 1:
        raise ValueError(f"n_blocks must be >= 1, got {n_blocks}")
    clipped = scenario.clipped
    rng = np.random.Generator(np.random.Philox(key=seed))
    u = rng.random(n_blocks)
    index = np.searchsorted(clipped.cdf, u, side="right")
    blocks = clipped.values[np.minimum(index, len(clipped.atoms) - 1)]
    return np.repeat(blocks, scenario.T)


def simulate(
    policy: Policy,
    scenario: Scenario,
    n_blocks: int,
    seed: int,
    burn_in_blocks: int = 0,
) -> TrajectoryResult:
    """Run ``policy`` from a full battery over burn-in plus ``n_blocks`` blocks.

    Args:
        policy: Fresh policy instance (owned by this trajectory).
        scenario: Validated scenario.
        n_blocks: Measured blocks.
        seed: Arrival stream seed.
        burn_in_blocks: Leading blocks excluded from the reward average.

    Returns:
        TrajectoryResult with the post-burn-in time average.
    """
    T = scenario.T
    b_bar = scenario.b_bar
    arrivals = generate_arrivals(scenario, burn_in_blocks + n_blocks, seed)
    n_slots = arrivals.size
    burn_in_slots = burn_in_blocks * T

    powers = np.empty(n_slots)
    battery = b_bar
    ctx = SlotContext(
        battery=battery,
        block_arrival=float(arrivals[0]),
        slot_in_block=1,
        block_start_battery=battery,
    )
    harvested = overflowed = 0.0
    overflow_events = 0
    min_battery = max_battery = battery

    for t in range(n_slots):
        slot = t % T + 1
        ctx.battery = battery
        ctx.slot_in_block = slot
        if slot == 1:
            ctx.block_arrival = float(arrivals[t])
            ctx.block_start_battery = battery

        g = policy.decide(ctx)
        powers[t] = g
        e_next = float(arrivals[t + 1]) if t + 1 < n_slots else 0.0
        battery, spilled = step_battery(battery, g, e_next, b_bar, slot=t + 1)
        harvested += e_next
        if spilled > 0.0:
            overflowed += spilled
            overflow_events += 1
        min_battery = min(min_battery, battery)
        max_battery = max(max_battery, battery)

    measured = powers[burn_in_slots:]
    total = float(np.sum(awgn_rate_array(measured)))
    horizon_slots = n_blocks * T
    return TrajectoryResult(
        horizon_slots=horizon_slots,
        total_reward_bits=total,
        time_avg=total / horizon_slots,
        overflow_events=overflow_events,
        seed=seed,
        burn_in_slots=burn_in_slots,
        harvested=harvested,
        consumed=float(np.sum(powers)),
        overflowed=overflowed,
        initial_battery=b_bar,
        final_battery=battery,
        min_battery=min_battery,
        max_battery=max_battery,
        clamp_events=policy.clamp_events,
        max_recharge_deficit=(
            policy.max_recharge_deficit
            if isinstance(policy, BlockFfpPolicy)
            else None
        ),
    )


def _run_replication(
    kind: PolicyKind,
    scenario: Scenario,
    params: PolicyParams,
    n_blocks: int,
    seed: int,
    burn_in_blocks: int,
) -> TrajectoryResult:
    policy = make_policy(kind, scenario, params)
    return simulate(policy, scenario, n_blocks, seed, burn_in_blocks)


def monte_carlo(
    policy_kind: PolicyKind,
    scenario: Scenario,
    n_blocks: int = DEFAULT_BLOCKS,
    reps: int = DEFAULT_REPS,
    base_seed: int = DEFAULT_SEED,
    burn_in_blocks: int = DEFAULT_BURN_IN,
    params: PolicyParams | None = None,
    threads: int | None = None,
) -> MonteCarloResult:
    """Mean and standard error of the throughput over independent replications.

    Replication r uses seed ``base_seed + r``. Replications may run in worker
    processes; results are merged in seed order.
    """
    if reps < 2:
        raise ValueError(f"reps must be >= 2, got {reps}")
    params = params or compute_params(scenario)
    seeds = [base_seed + r for r in range(reps)]
    workers = min(resolve_threads(threads), reps)
    args = [
        (policy_kind, scenario, params, n_blocks, seed, burn_in_blocks)
        for seed in seeds
    ]

    logger.info(
        f"Simulating {policy_kind.value}: {reps} reps x {n_blocks} blocks "
        f"on {workers} worker(s)"
    )
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            results = list(executor.map(_run_replication, *zip(*args)))
    else:
        results = [_run_replication(*a) for a in args]

    averages = np.array([r.time_avg for r in results])
    deficits = [
        r.max_recharge_deficit for r in results if r.max_recharge_deficit is not None
    ]
    return MonteCarloResult(
        mean=float(averages.mean()),
        stderr=float(averages.std(ddof=1) / math.sqrt(reps)),
        reps=reps,
        horizon_slots=n_blocks * scenario.T,
        burn_in_slots=burn_in_blocks * scenario.T,
        per_rep=tuple(float(a) for a in averages),
        overflow_events=sum(r.overflow_events for r in results),
        max_recharge_deficit=max(deficits) if deficits else None,
    )


def check_semi_bernoulli(scenario: Scenario, e_c: float) -> bool:
    """Whether no atom lies in the open interval (0, E_c)."""
    return not any(
        ENERGY_ATOL < value < e_c - ENERGY_ATOL for value, _ in scenario.arrivals.atoms
    )


def _first_block_reward(scenario: Scenario, params: PolicyParams) -> float:
    """Per-slot reward of the block that opens an epoch, averaged over E >= E_c."""
    T = scenario.T
    b_bar = scenario.b_bar
    tail_rate = awgn_rate(params.q * params.e_c)
    large = [
        (value, prob)
        for value, prob in scenario.arrivals.atoms
        if value >= params.e_c - ENERGY_ATOL
    ]
    total = math.fsum(prob for _, prob in large)
    if T == 1:
        return tail_rate
    head = math.fsum(
        prob * awgn_rate(min(value - (b_bar - value) / (T - 1), b_bar))
        for value, prob in large
    )
    return (T - 1) / T * head / total + tail_rate / T


def _require_semi_bernoulli(scenario: Scenario, params: PolicyParams) -> None:
    for value, _ in scenario.arrivals.atoms:
        if ENERGY_ATOL < value < params.e_c - ENERGY_ATOL:
            raise NotSemiBernoulliError(
                f"atom {value:g} lies strictly between 0 and E_c={params.e_c:g}",
                value,
            )


def renewal_series_lower_bound(
    scenario: Scenario, params: PolicyParams | None = None
) -> float:
    """Renewal-reward throughput of Policy 1 for semi-Bernoulli arrivals.

    Sums q (first + sum_k (1-q)^k C(q (1-q)^k E_c)) with as many terms as
    needed for the certified tail bound to fall below 1e-12.

    Raises:
        NotSemiBernoulliError: If an atom lies strictly between 0 and E_c.
    """
    params = params or compute_params(scenario)
    _require_semi_bernoulli(scenario, params)
    q = params.q
    if q <= 0.0:
        return 0.0

    first = _first_block_reward(scenario, params)
    lead = awgn_rate(q * params.e_c)
    if q >= 1.0 or lead == 0.0:
        return q * first

    # Tail after n terms is at most (1-q)^(n+1) C(q E_c) / q.
    n_terms = max(1, math.ceil(math.log(SERIES_TAIL_TOL * q / lead) / math.log1p(-q)))
    decay = (1.0 - q) ** np.arange(1, n_terms + 1)
    series = float(np.sum(decay * awgn_rate_array(q * decay * params.e_c)))
    logger.debug(f"Renewal series summed {n_terms} terms")
    return q * (first + series)


def renewal_closed_form_bound(
    scenario: Scenario, params: PolicyParams | None = None
) -> float:
    """Closed-form relaxation of the renewal series.

    q first + (1-q) C(q E_c) + ((1-q) / (2q)) log2(1-q).
    """
    params = params or compute_params(scenario)
    _require_semi_bernoulli(scenario, params)
    q = params.q
    if q <= 0.0:
        return 0.0
    first = _first_block_reward(scenario, params)
    value = q * first + (1.0 - q) * awgn_rate(q * params.e_c)
    if q < 1.0:
        value += (1.0 - q) / (2.0 * q) * math.log2(1.0 - q)
    return value
