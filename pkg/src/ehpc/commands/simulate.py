"""Monte Carlo simulation command and the CSV run record."""

from __future__ import annotations

import time
from dataclasses import asdict, dataclass
from typing import Any

from ..config import RunConfig
from ..constants import RUN_RECORD_COLUMNS, PolicyKind
from ..policies import parse_policy_kind
from ..scenario import Scenario
from ..simulator import monte_carlo
from ..solver import PolicyParams, compute_params, throughput_bounds
from ..utils import format_float


@dataclass
class RunRecord:
    """One CSV row; optional cells are empty when not computed."""

    scenario_id: str
    T: int
    B: float
    policy: str = ""
    horizon_blocks: int | None = None
    reps: int | None = None
    mean_bits: float | None = None
    stderr_bits: float | None = None
    theta_bar: float | None = None
    lower_bound: float | None = None
    theta_vi: float | None = None
    wall_time_s: float | None = None

    def as_row(self) -> list[str]:
        """Cells in RUN_RECORD_COLUMNS order, floats with 12 significant digits."""
        values = asdict(self)
        row = []
        for column in RUN_RECORD_COLUMNS:
            value = values[column]
            if value is None:
                row.append("")
            elif isinstance(value, float):
                row.append(format_float(value))
            else:
                row.append(str(value))
        return row


def run_simulation(
    scenario: Scenario,
    policy: str | PolicyKind = PolicyKind.BLOCK_FFP,
    config: RunConfig | None = None,
    timing: bool = False,
    params: PolicyParams | None = None,
) -> dict[str, Any]:
    """Simulate a policy and summarise the run.

    Args:
        scenario: Validated scenario
        policy: Policy kind or CLI name (p1, ffp, greedy, mean, naive)
        config: Run configuration (the CLI configuration by default)
        timing: Record wall-clock time (otherwise ``wall_time_s`` stays empty)
        params: Policy 1 parameters (solved from the scenario by default)

    Returns:
        record (RunRecord), overflow_events and max_recharge_deficit
    """
    if config is None:
        from ..cli import get_config

        config = get_config()

    kind = policy if isinstance(policy, PolicyKind) else parse_policy_kind(policy)
    params = params or compute_params(scenario)
    lower, upper = throughput_bounds(scenario, params)

    started = time.perf_counter()
    result = monte_carlo(
        kind,
        scenario,
        n_blocks=config.blocks,
        reps=config.reps,
        base_seed=config.seed,
        burn_in_blocks=config.burn_in,
        params=params,
        threads=config.threads,
    )
    elapsed = time.perf_counter() - started

    record = RunRecord(
        scenario_id=scenario.scenario_id,
        T=scenario.T,
        B=scenario.b_bar,
        policy=kind.value,
        horizon_blocks=config.blocks,
        reps=config.reps,
        mean_bits=result.mean,
        stderr_bits=result.stderr,
        theta_bar=upper,
        lower_bound=lower,
        wall_time_s=elapsed if timing else None,
    )
    return {
        "record": record,
        "overflow_events": result.overflow_events,
        "max_recharge_deficit": result.max_recharge_deficit,
    }
