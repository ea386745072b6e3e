"""Parameter sweep over the battery size or the coherence time."""

from __future__ import annotations

import logging
import time
from collections.abc import Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import replace
from typing import Any

from ..config import RunConfig
from ..constants import PolicyKind
from ..policies import parse_policy_kind
from ..scenario import Scenario
from ..simulator import monte_carlo
from ..solver import compute_params, throughput_bounds
from ..utils import resolve_threads
from .simulate import RunRecord

logger = logging.getLogger(__name__)

SWEEP_PARAMS = ("B", "T")


def sweep_scenarios(
    scenario: Scenario, param: str, values: Sequence[float]
) -> list[Scenario]:
    """Copies of ``scenario`` with B or T replaced by each value in turn.

    Raises:
        ValueError: For an unknown parameter, an empty value list or a
            non-integer T
    """
    if param not in SWEEP_PARAMS:
        raise ValueError(f"--param must be one of {', '.join(SWEEP_PARAMS)}")
    if not values:
        raise ValueError("--values must list at least one value")

    scenarios = []
    for value in values:
        if param == "B":
            scenarios.append(replace(scenario, b_bar=float(value)))
        else:
            if float(value) != int(value):
                raise ValueError(f"T must be an integer, got {value}")
            scenarios.append(replace(scenario, T=int(value)))
    return scenarios


def _sweep_point(
    scenario: Scenario,
    kind: PolicyKind | None,
    config: RunConfig,
    timing: bool,
) -> RunRecord:
    started = time.perf_counter()
    params = compute_params(scenario)
    lower, upper = throughput_bounds(scenario, params)
    record = RunRecord(
        scenario_id=scenario.scenario_id,
        T=scenario.T,
        B=scenario.b_bar,
        theta_bar=upper,
        lower_bound=lower,
    )
    if kind is not None:
        result = monte_carlo(
            kind,
            scenario,
            n_blocks=config.blocks,
            reps=config.reps,
            base_seed=config.seed,
            burn_in_blocks=config.burn_in,
            params=params,
            threads=1,
        )
        record.policy = kind.value
        record.horizon_blocks = config.blocks
        record.reps = config.reps
        record.mean_bits = result.mean
        record.stderr_bits = result.stderr
    if timing:
        record.wall_time_s = time.perf_counter() - started
    return record


def run_sweep(
    scenario: Scenario,
    param: str,
    values: Sequence[float],
    policy: str | PolicyKind | None = None,
    config: RunConfig | None = None,
    timing: bool = False,
) -> dict[str, Any]:
    """Evaluate the closed-form bounds, and optionally simulate, per sweep value.

    Args:
        scenario: Base scenario
        param: "B" or "T"
        values: Values substituted for ``param``
        policy: Policy to simulate at each point (bounds only when None)
        config: Run configuration (the CLI configuration by default)
        timing: Record wall-clock time per point

    Returns:
        param, values and one RunRecord per value, in input order
    """
    if config is None:
        from ..cli import get_config

        config = get_config()

    points = sweep_scenarios(scenario, param, values)
    kind = (
        policy
        if policy is None or isinstance(policy, PolicyKind)
        else parse_policy_kind(policy)
    )

    workers = min(resolve_threads(config.threads), len(points))
    logger.info(f"Sweeping {param} over {len(points)} values on {workers} worker(s)")
    if kind is not None and workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            futures = [
                executor.submit(_sweep_point, point, kind, config, timing)
                for point in points
            ]
            records = [future.result() for future in futures]
    else:
        records = [_sweep_point(point, kind, config, timing) for point in points]

    return {"param": param, "values": list(values), "records": records}
