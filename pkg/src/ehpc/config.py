"""Run configuration loaded from ehpcconfig.json."""

from __future__ import annotations

import json
import logging
from dataclasses import dataclass, field, fields, replace
from pathlib import Path
from typing import Any

from .constants import (
    CONFIG_FILENAME,
    DEFAULT_ACTION_GRID,
    DEFAULT_BLOCKS,
    DEFAULT_BURN_IN,
    DEFAULT_DOMINANCE_HORIZONS,
    DEFAULT_GRID,
    DEFAULT_KKT_STARTS,
    DEFAULT_REPS,
    DEFAULT_SEED,
    DEFAULT_UNIFORMIZATION_SAMPLES,
    DEFAULT_VERIFY_BLOCKS,
    DEFAULT_VERIFY_REPS,
    DEFAULT_VI_MAX_ITER,
    DEFAULT_VI_TOL,
)

logger = logging.getLogger(__name__)


@dataclass
class RunConfig:
    """Defaults for simulation, value iteration and verification runs."""

    blocks: int = DEFAULT_BLOCKS
    reps: int = DEFAULT_REPS
    burn_in: int = DEFAULT_BURN_IN
    seed: int = DEFAULT_SEED
    grid: int = DEFAULT_GRID
    n_action: int = DEFAULT_ACTION_GRID
    vi_tol: float = DEFAULT_VI_TOL
    vi_max_iter: int = DEFAULT_VI_MAX_ITER
    threads: int | None = None
    verify_blocks: int = DEFAULT_VERIFY_BLOCKS
    verify_reps: int = DEFAULT_VERIFY_REPS
    dominance_horizons: tuple[int, ...] = field(
        default_factory=lambda: DEFAULT_DOMINANCE_HORIZONS
    )
    uniformization_samples: int = DEFAULT_UNIFORMIZATION_SAMPLES
    kkt_starts: int = DEFAULT_KKT_STARTS

    def __post_init__(self) -> None:
        self.dominance_horizons = tuple(int(n) for n in self.dominance_horizons)

    def override(self, **kwargs: Any) -> RunConfig:
        """Return a copy with every non-None keyword applied."""
        updates = {key: value for key, value in kwargs.items() if value is not None}
        return replace(self, **updates)


def load_config(path: str | Path | None = None) -> RunConfig:
    """Load configuration from ehpcconfig.json if it exists.

    Args:
        path: Config file location (defaults to ehpcconfig.json in the cwd).

    Returns:
        RunConfig with file values applied over the defaults.
    """
    config_path = Path(path) if path is not None else Path(CONFIG_FILENAME)
    if config_path.exists():
        try:
            with open(config_path) as f:
                data = json.load(f)
            known = {f.name for f in fields(RunConfig)}
            unknown = sorted(set(data) - known)
            if unknown:
                logger.warning(f"Ignoring unknown config keys: {unknown}")
            return RunConfig(**{k: v for k, v in data.items() if k in known})
        except Exception as e:
            logger.warning(f"Failed to load config: {e}")
    return RunConfig()
