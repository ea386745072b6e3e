"""Shared pytest fixtures for ehpc tests."""

from __future__ import annotations

import sys
from collections.abc import Callable, Generator
from pathlib import Path

import pytest

# Add parent directory to path for imports
sys.path.insert(0, str(Path(__file__).parent.parent))

from src.ehpc import DiscreteDistribution, RunConfig, Scenario
from src.ehpc import cli as cli_module

SAMPLES = Path(__file__).parent / "samples"

# Acceptance matrix: id -> (T, B, [(value, prob), ...]).
MATRIX: dict[str, tuple[int, float, list[tuple[float, float]]]] = {
    "bernoulli": (4, 10.0, [(0.0, 0.5), (6.0, 0.5)]),
    "worked": (2, 6.0, [(1.0, 0.5), (5.0, 0.5)]),
    "three_atom": (2, 6.0, [(0.0, 0.3), (2.0, 0.4), (8.0, 0.3)]),
    "four_atom": (4, 8.0, [(0.5, 0.25), (1.5, 0.25), (3.0, 0.3), (7.0, 0.2)]),
    "single_slot": (1, 4.0, [(0.0, 0.5), (6.0, 0.5)]),
    "single_slot_spread": (1, 5.0, [(1.0, 0.3), (2.0, 0.4), (4.0, 0.3)]),
    "large_battery": (3, 6.0, [(0.0, 0.5), (2.0, 0.5)]),
    "tail_and_middle": (4, 8.0, [(0.0, 0.4), (2.0, 0.2), (6.0, 0.2), (10.0, 0.2)]),
    "long_block_clipped": (8, 12.0, [(0.0, 0.6), (15.0, 0.4)]),
    "long_block_four_atom": (
        8,
        20.0,
        [(0.0, 0.3), (1.0, 0.3), (4.0, 0.2), (16.0, 0.2)],
    ),
    "wide_battery": (8, 20.0, [(0.0, 0.5), (4.0, 0.5)]),
}


def make_scenario(
    T: int, b_bar: float, pairs: list[tuple[float, float]], scenario_id: str = "test"
) -> Scenario:
    """Build a scenario from (value, prob) pairs."""
    return Scenario(
        T=T,
        b_bar=b_bar,
        arrivals=DiscreteDistribution.from_pairs(pairs),
        scenario_id=scenario_id,
    )


@pytest.fixture(autouse=True)
def reset_globals() -> Generator[None, None, None]:
    """Reset the CLI's global configuration between tests."""
    original_config = cli_module._config

    yield

    cli_module._config = original_config


def matrix_member(scenario_id: str) -> Scenario:
    """Scenario of the acceptance matrix by id."""
    T, b_bar, pairs = MATRIX[scenario_id]
    return make_scenario(T, b_bar, pairs, scenario_id)


@pytest.fixture(params=sorted(MATRIX))
def matrix_scenario(request: pytest.FixtureRequest) -> Scenario:
    """Every scenario of the acceptance matrix."""
    return matrix_member(request.param)


@pytest.fixture
def bernoulli() -> Scenario:
    """Bernoulli arrivals {0, 6}, T=4, B=10: E_c=4, q=0.5."""
    return matrix_member("bernoulli")


@pytest.fixture
def worked() -> Scenario:
    """Two-atom arrivals {1, 5}, T=2, B=6: E_c=13/3, q=8/13."""
    return matrix_member("worked")


@pytest.fixture
def three_atom() -> Scenario:
    """Arrivals {0, 2, 8}, T=2, B=6: E_c=4, q=0.5, p=p'=0.3."""
    return matrix_member("three_atom")


@pytest.fixture
def four_atom() -> Scenario:
    """Arrivals {0.5, 1.5, 3, 7}, T=4, B=8."""
    return matrix_member("four_atom")


@pytest.fixture
def large_battery() -> Scenario:
    """Arrivals {0, 2}, T=3, B=6, above the threshold mu + T(E_max - mu) = 4."""
    return matrix_member("large_battery")


@pytest.fixture
def single_slot() -> Scenario:
    """Arrivals {0, 6}, T=1, B=4: E_c=B, q=0.5."""
    return matrix_member("single_slot")


@pytest.fixture
def zero() -> Scenario:
    """All-zero arrivals."""
    return make_scenario(2, 4.0, [(0.0, 1.0)], "zero")


@pytest.fixture
def samples_dir() -> Path:
    """Directory holding the scenario JSON samples."""
    return SAMPLES


@pytest.fixture
def sample_path() -> Callable[[str], str]:
    """Factory for sample file paths by stem."""

    def _path(stem: str) -> str:
        return str(SAMPLES / f"{stem}.json")

    return _path


@pytest.fixture
def fast_config() -> RunConfig:
    """A RunConfig small enough for unit tests."""
    return RunConfig(
        blocks=2_000,
        reps=4,
        burn_in=50,
        seed=0,
        grid=65,
        n_action=17,
        vi_tol=1e-6,
        vi_max_iter=20_000,
        threads=1,
        verify_blocks=2_000,
        verify_reps=4,
        dominance_horizons=(1, 2, 4),
        uniformization_samples=200,
        kkt_starts=5,
    )
