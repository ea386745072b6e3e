"""Problem instances: block length, battery capacity and arrival distribution."""

from __future__ import annotations

import json
import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Any

import numpy as np
from numpy.typing import NDArray
from scipy.stats import entropy

from .constants import DIST_PROB_TOLERANCE, ENERGY_ATOL, LOAD_PROB_TOLERANCE
from .exceptions import ScenarioError

logger = logging.getLogger(__name__)

SCENARIO_KEYS = frozenset({"T", "B", "arrivals"})
ATOM_KEYS = frozenset({"value", "prob"})


@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite-support distribution of the per-block arrival energy.

    ``tail_prob`` records the mass that sat above the battery capacity before
    clipping (zero for a distribution that was never clipped).
    """

    atoms: tuple[tuple[float, float], ...]
    tail_prob: float = 0.0

    def __post_init__(self) -> None:
        if not self.atoms:
            raise ScenarioError("distribution needs at least one atom", "arrivals")

        previous = -math.inf
        for value, prob in self.atoms:
            if not math.isfinite(value) or value < 0:
                raise ScenarioError(f"invalid energy value {value}", "value")
            if not math.isfinite(prob) or prob <= 0:
                raise ScenarioError(f"probability must be positive, got {prob}", "prob")
            if value <= previous:
                raise ScenarioError("atom values must be strictly increasing", "value")
            previous = value

        total = math.fsum(prob for _, prob in self.atoms)
        if abs(total - 1.0) > DIST_PROB_TOLERANCE:
            raise ScenarioError(f"probabilities sum to {total:.15g}, not 1", "prob")

    @classmethod
    def from_pairs(
        cls, pairs: Iterable[tuple[float, float]], tail_prob: float = 0.0
    ) -> DiscreteDistribution:
        """Build a distribution from unsorted (value, prob) pairs.

        Duplicate values are merged by summing their probabilities.
        """
        merged: dict[float, float] = {}
        for value, prob in pairs:
            merged[float(value)] = merged.get(float(value), 0.0) + float(prob)
        atoms = tuple(sorted(merged.items()))
        return cls(atoms=atoms, tail_prob=tail_prob)

    @property
    def values(self) -> NDArray[np.float64]:
        return np.array([v for v, _ in self.atoms], dtype=np.float64)

    @property
    def probs(self) -> NDArray[np.float64]:
        return np.array([p for _, p in self.atoms], dtype=np.float64)

    @property
    def mean(self) -> float:
        return float(self.values @ self.probs)

    @property
    def e_max(self) -> float:
        return self.atoms[-1][0]

    @property
    def entropy_bits(self) -> float:
        return float(entropy(self.probs, base=2))

    @property
    def cdf(self) -> NDArray[np.float64]:
        cdf = np.cumsum(self.probs)
        cdf[-1] = 1.0
        return cdf

    def expected_min(self, x: float) -> float:
        """E[min(E, x)], summed exactly over the support."""
        return float(np.minimum(self.values, x) @ self.probs)

    def mass_above(self, x: float, atol: float = ENERGY_ATOL) -> float:
        """Pr(E > x), with atoms within ``atol`` of x counted as equal to x."""
        return math.fsum(p for v, p in self.atoms if v > x + atol)

    def mass_below(self, x: float, atol: float = ENERGY_ATOL) -> float:
        """Pr(E <= x) under the same tolerance as ``mass_above``."""
        return math.fsum(p for v, p in self.atoms if v <= x + atol)

    def conditional_mean_below(self, x: float, atol: float = ENERGY_ATOL) -> float:
        """E[E | E <= x], or 0 when that event has no mass."""
        mass = self.mass_below(x, atol)
        if mass == 0.0:
            return 0.0
        return math.fsum(v * p for v, p in self.atoms if v <= x + atol) / mass

    def atoms_between(
        self, low: float, high: float, atol: float = ENERGY_ATOL
    ) -> list[tuple[float, float]]:
        """Atoms with low < v <= high (tolerant at both ends)."""
        return [(v, p) for v, p in self.atoms if low + atol < v <= high + atol]


@dataclass(frozen=True)
class DistStats:
    """Summary statistics of the (clipped) block arrival."""

    mu: float
    e_max: float
    entropy_bits: float


@dataclass(frozen=True)
class Scenario:
    """A problem instance (T, B, arrival distribution)."""

    T: int
    b_bar: float
    arrivals: DiscreteDistribution
    scenario_id: str = field(default="scenario", compare=False)

    def __post_init__(self) -> None:
        if isinstance(self.T, bool) or not isinstance(self.T, int) or self.T < 1:
            raise ScenarioError(f"T must be an integer >= 1, got {self.T!r}", "T")
        if not math.isfinite(self.b_bar) or self.b_bar <= 0:
            raise ScenarioError(f"B must be positive, got {self.b_bar!r}", "B")

    @cached_property
    def clipped(self) -> DiscreteDistribution:
        return clip_distribution(self.arrivals, self.b_bar)

    @property
    def tail_prob(self) -> float:
        """Pr(E > B) before clipping."""
        return self.clipped.tail_prob

    @property
    def is_degenerate(self) -> bool:
        return self.arrivals.e_max == 0.0


def clip_distribution(dist: DiscreteDistribution, b_bar: float) -> DiscreteDistribution:
    """Replace every atom value v by min(v, B) and merge the atoms at B.

    The pre-clipping mass above B is accumulated into ``tail_prob``, so
    clipping an already clipped distribution is a no-op.
    """
    tail = dist.tail_prob + math.fsum(p for v, p in dist.atoms if v > b_bar)
    return DiscreteDistribution.from_pairs(
        ((min(v, b_bar), p) for v, p in dist.atoms), tail_prob=tail
    )


def dist_stats(scenario: Scenario) -> DistStats:
    """Mean, maximum and entropy (bits) of the clipped arrival distribution."""
    clipped = scenario.clipped
    return DistStats(
        mu=clipped.mean, e_max=clipped.e_max, entropy_bits=clipped.entropy_bits
    )


def large_battery_threshold(scenario: Scenario) -> float:
    """Battery size mu + T (E_max - mu) beyond which the AWGN rate C(mu) is reached."""
    stats = dist_stats(scenario)
    return stats.mu + scenario.T * (stats.e_max - stats.mu)


def is_large_battery(scenario: Scenario) -> bool:
    return scenario.b_bar >= large_battery_threshold(scenario) - ENERGY_ATOL


def _require_number(data: dict[str, Any], key: str) -> float:
    value = data[key]
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ScenarioError(f"'{key}' must be a number, got {value!r}", key)
    if not math.isfinite(value):
        raise ScenarioError(f"'{key}' must be finite, got {value!r}", key)
    return float(value)


def _parse_document(data: Any, scenario_id: str) -> Scenario:
    if not isinstance(data, dict):
        raise ScenarioError("scenario document must be a JSON object")

    missing = SCENARIO_KEYS - data.keys()
    extra = data.keys() - SCENARIO_KEYS
    if missing:
        raise ScenarioError(f"missing keys: {sorted(missing)}")
    if extra:
        raise ScenarioError(f"unexpected keys: {sorted(extra)}")

    T = data["T"]
    if isinstance(T, bool) or not isinstance(T, int):
        raise ScenarioError(f"'T' must be an integer, got {T!r}", "T")
    if T < 1:
        raise ScenarioError(f"'T' must be >= 1, got {T}", "T")

    b_bar = _require_number(data, "B")
    if b_bar <= 0:
        raise ScenarioError(f"'B' must be positive, got {b_bar}", "B")

    arrivals = data["arrivals"]
    if not isinstance(arrivals, list) or not arrivals:
        raise ScenarioError("'arrivals' must be a non-empty list", "arrivals")

    pairs: list[tuple[float, float]] = []
    for index, atom in enumerate(arrivals):
        if not isinstance(atom, dict) or set(atom.keys()) != ATOM_KEYS:
            raise ScenarioError(
                f"arrival {index} must have exactly the keys 'value' and 'prob'",
                "arrivals",
            )
        value = _require_number(atom, "value")
        prob = _require_number(atom, "prob")
        if value < 0:
            raise ScenarioError(f"arrival {index} has negative value {value}", "value")
        if prob <= 0:
            raise ScenarioError(
                f"arrival {index} has nonpositive probability {prob}", "prob"
            )
        pairs.append((value, prob))

    total = math.fsum(prob for _, prob in pairs)
    if abs(total - 1.0) > LOAD_PROB_TOLERANCE:
        raise ScenarioError(f"probabilities sum to {total:.12g}, not 1", "prob")
    if abs(total - 1.0) > DIST_PROB_TOLERANCE:
        pairs = [(value, prob / total) for value, prob in pairs]

    scenario = Scenario(
        T=T,
        b_bar=b_bar,
        arrivals=DiscreteDistribution.from_pairs(pairs),
        scenario_id=scenario_id,
    )
    if scenario.is_degenerate:
        logger.warning(f"Scenario '{scenario_id}' is degenerate: all arrivals are 0")
    return scenario


def load_scenario(text: str, scenario_id: str = "scenario") -> Scenario:
    """Parse and validate a scenario document.

    Args:
        text: JSON document ``{"T": int, "B": float, "arrivals": [...]}``.
        scenario_id: Identifier carried into reports.

    Returns:
        Validated Scenario with sorted, merged atoms.
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise ScenarioError(f"malformed scenario document: {e}") from e
    return _parse_document(data, scenario_id)


def load_scenario_file(path: str | Path) -> Scenario:
    """Load a scenario from a file, using the file stem as its identifier."""
    path = Path(path)
    return load_scenario(path.read_text(), scenario_id=path.stem)


def dump_scenario(scenario: Scenario) -> str:
    """Serialise a scenario to its JSON document form."""
    document = {
        "T": scenario.T,
        "B": scenario.b_bar,
        "arrivals": [
            {"value": value, "prob": prob} for value, prob in scenario.arrivals.atoms
        ],
    }
    return json.dumps(document)
