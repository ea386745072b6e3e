"""Numerical ground truth: value iteration, finite-horizon DP and dominance checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .constants import (
    CONCAVITY_TOL,
    DEFAULT_ACTION_GRID,
    DEFAULT_GRID,
    DEFAULT_VI_MAX_ITER,
    DEFAULT_VI_TOL,
    DOMINANCE_TOL,
    ENERGY_ATOL,
    MIN_BATTERY_GRID,
)
from .exceptions import NonConvergenceError
from .scenario import DiscreteDistribution, Scenario
from .solver import PolicyParams
from .utils import awgn_rate_array, monotone_concave_violation

logger = logging.getLogger(__name__)

_Weights = tuple[NDArray[np.intp], NDArray[np.float64]]


@dataclass(frozen=True)
class ReducedState:
    """Effective block energy x = (b1 + (T-1) E) / T and indicator s = 1{E > E_c}."""

    x: float
    s: int

    def __post_init__(self) -> None:
        if self.s not in (0, 1):
            raise ValueError(f"s must be 0 or 1, got {self.s}")
        if self.x < 0.0:
            raise ValueError(f"x must be nonnegative, got {self.x}")


def reduce_state(
    b1: float, E: float, scenario: Scenario, params: PolicyParams
) -> ReducedState:
    """Reduced state of a block entered with battery b1 and arrival E."""
    T = scenario.T
    E = min(E, scenario.b_bar)
    x = min((b1 + (T - 1) * E) / T, scenario.b_bar)
    return ReducedState(x=x, s=int(E > params.e_c + ENERGY_ATOL))


@dataclass(frozen=True)
class GridSpec:
    """Discretization and stopping rule for the numerical oracles."""

    n_battery: int = DEFAULT_GRID
    n_action: int = DEFAULT_ACTION_GRID
    vi_tolerance: float = DEFAULT_VI_TOL
    max_iter: int = DEFAULT_VI_MAX_ITER
    step_size: float = 0.5
    ref_index: int = 0

    def __post_init__(self) -> None:
        if self.n_battery < MIN_BATTERY_GRID:
            raise ValueError(
                f"n_battery must be >= {MIN_BATTERY_GRID}, got {self.n_battery}"
            )
        if self.n_action < 2:
            raise ValueError(f"n_action must be >= 2, got {self.n_action}")
        if self.vi_tolerance <= 0:
            raise ValueError(f"vi_tolerance must be positive, got {self.vi_tolerance}")
        if not 0.0 < self.step_size <= 1.0:
            raise ValueError(f"step_size must lie in (0, 1], got {self.step_size}")

    def doubled(self) -> GridSpec:
        """Grid with twice the cells; every coarse point stays a grid point."""
        return replace(
            self,
            n_battery=2 * self.n_battery - 1,
            n_action=2 * self.n_action - 1,
        )


@dataclass(frozen=True)
class PolicyTable:
    """Greedy actions of the value-iteration solution."""

    b1_grid: NDArray[np.float64]
    atoms: NDArray[np.float64]
    g_head: NDArray[np.float64]
    g_tail: NDArray[np.float64]


@dataclass(frozen=True)
class ValueIterationResult:
    """Gain (bits/slot) and bias of the discretized block MDP."""

    theta_vi: float
    span: float
    iterations: int
    bias: NDArray[np.float64]
    policy_table: PolicyTable
    grid: GridSpec


@dataclass(frozen=True)
class GridSlack:
    """Discretization slack estimated by grid doubling."""

    theta_coarse: float
    theta_fine: float
    delta: float


@dataclass(frozen=True)
class ModifiedScenario:
    """Scenario whose mass at or below E_c is moved onto {0, E_c}."""

    base: Scenario
    distribution: DiscreteDistribution
    w_prob: float

    @property
    def scenario(self) -> Scenario:
        return Scenario(
            T=self.base.T,
            b_bar=self.base.b_bar,
            arrivals=self.distribution,
            scenario_id=f"{self.base.scenario_id}-modified",
        )


@dataclass(frozen=True)
class FiniteHorizonTable:
    """J_N(x, s) on the x grid; column s is the large-arrival indicator."""

    horizon: int
    x_grid: NDArray[np.float64]
    values: NDArray[np.float64]


@dataclass(frozen=True)
class DominanceReport:
    """Comparison of J_N (original arrivals) with J_N under modified arrivals."""

    horizon: int
    max_violation: float
    tolerance: float
    interpolation_slack: float

    @property
    def passed(self) -> bool:
        return self.max_violation <= self.tolerance


def _interp_weights(
    grid: NDArray[np.float64], points: NDArray[np.float64]
) -> _Weights:
    """Left neighbour index and weight for linear interpolation on ``grid``."""
    lo = np.clip(np.searchsorted(grid, points, side="right") - 1, 0, grid.size - 2)
    w = (points - grid[lo]) / (grid[lo + 1] - grid[lo])
    return lo, np.clip(w, 0.0, 1.0)


def _gather(
    values: NDArray[np.float64], lo: NDArray[np.intp], w: NDArray[np.float64]
) -> NDArray[np.float64]:
    return (1.0 - w) * values[lo] + w * values[lo + 1]


class _BlockMdp:
    """Precomputed transition geometry of the discretized block MDP."""

    def __init__(self, scenario: Scenario, grid: GridSpec) -> None:
        T = scenario.T
        b_bar = scenario.b_bar
        clipped = scenario.clipped
        self.T = T
        self.x = np.linspace(0.0, b_bar, grid.n_battery)
        self.atoms = clipped.values
        self.probs = clipped.probs
        n, J = self.x.size, self.atoms.size

        # Next-block battery min(y + E', B) for leftover y on the grid.
        self.next_lo = np.empty((J, n), dtype=np.intp)
        self.next_w = np.empty((J, n))
        for j, e_next in enumerate(self.atoms):
            lo, w = _interp_weights(self.x, np.minimum(self.x + e_next, b_bar))
            self.next_lo[j], self.next_w[j] = lo, w

        # Tail reward C(b_T - y) / T for every leftover y <= b_T.
        spend = self.x[:, None] - self.x[None, :]
        self.tail_reward = np.where(
            spend >= 0.0, awgn_rate_array(np.maximum(spend, 0.0)) / T, -np.inf
        )

        n_action = grid.n_action if T > 1 else 1
        b1 = self.x[:, None]
        E = self.atoms[None, :]
        if T > 1:
            g_max = np.minimum((b1 + (T - 2) * E) / (T - 1), np.minimum(b1, b_bar))
        else:
            g_max = np.zeros((n, J))
        fractions = np.linspace(0.0, 1.0, n_action) if n_action > 1 else np.zeros(1)
        self.g_head = g_max[:, :, None] * fractions[None, None, :]
        b_T = np.minimum(
            b1[:, :, None] + (T - 1) * (E[:, :, None] - self.g_head), b_bar
        )
        self.bt_lo, self.bt_w = _interp_weights(self.x, np.maximum(b_T, 0.0))
        self.head_reward = (T - 1) / T * awgn_rate_array(self.g_head)

    def continuation(self, V: NDArray[np.float64]) -> NDArray[np.float64]:
        """W(y) = sum_j P_j V(min(y + E_j, B), j) for y on the grid."""
        W = np.zeros(self.x.size)
        for j, prob in enumerate(self.probs):
            W += prob * _gather(V[:, j], self.next_lo[j], self.next_w[j])
        return W

    def backup(
        self, V: NDArray[np.float64]
    ) -> tuple[NDArray[np.float64], NDArray[np.intp], NDArray[np.intp]]:
        """Bellman operator; returns (TV, head argmax, tail argmax)."""
        scores = self.tail_reward + self.continuation(V)[None, :]
        tail_choice = scores.argmax(axis=1)
        h = scores[np.arange(self.x.size), tail_choice]
        q_values = self.head_reward + _gather(h, self.bt_lo, self.bt_w)
        head_choice = q_values.argmax(axis=2)
        TV = np.take_along_axis(q_values, head_choice[:, :, None], axis=2)[:, :, 0]
        return TV, head_choice, tail_choice


def value_iterate(
    scenario: Scenario, grid: GridSpec | None = None
) -> ValueIterationResult:
    """Relative value iteration for the block MDP over (b1, E).

    Args:
        scenario: Validated scenario.
        grid: Discretization and stopping rule.

    Returns:
        ValueIterationResult with the gain in bits per slot.

    Raises:
        NonConvergenceError: If the span of successive differences stays above
            the tolerance for ``grid.max_iter`` iterations.
    """
    grid = grid or GridSpec()
    mdp = _BlockMdp(scenario, grid)
    V = np.zeros((mdp.x.size, mdp.atoms.size))
    span = np.inf

    for iteration in range(1, grid.max_iter + 1):
        TV, head_choice, tail_choice = mdp.backup(V)
        D = TV - V
        span = float(D.max() - D.min())
        if span < grid.vi_tolerance:
            gain = float(D.max() + D.min()) / 2.0
            logger.info(
                f"Value iteration converged: gain={gain:.9f} after {iteration} "
                f"iterations (span={span:.2e})"
            )
            g_head = np.take_along_axis(mdp.g_head, head_choice[:, :, None], axis=2)
            table = PolicyTable(
                b1_grid=mdp.x,
                atoms=mdp.atoms,
                g_head=g_head[:, :, 0],
                g_tail=mdp.x - mdp.x[tail_choice],
            )
            return ValueIterationResult(
                theta_vi=gain,
                span=span,
                iterations=iteration,
                bias=V,
                policy_table=table,
                grid=grid,
            )
        V = V + grid.step_size * D
        V -= V.flat[grid.ref_index]
        if iteration % 1000 == 0:
            logger.debug(f"Value iteration {iteration}: span={span:.3e}")

    raise NonConvergenceError("value iteration did not converge", span, grid.max_iter)


def estimate_grid_slack(
    scenario: Scenario,
    grid: GridSpec | None = None,
    coarse: float | None = None,
) -> GridSlack:
    """Discretization slack of ``value_iterate`` by grid doubling.

    With error proportional to the cell size, the coarse grid is off by about
    twice the coarse-to-fine change. Pass ``coarse`` to reuse a gain already
    computed on ``grid``.
    """
    grid = grid or GridSpec()
    if coarse is None:
        coarse = value_iterate(scenario, grid).theta_vi
    fine = value_iterate(scenario, grid.doubled()).theta_vi
    delta = 2.0 * abs(coarse - fine) + grid.vi_tolerance
    logger.info(f"Grid slack: coarse={coarse:.9f} fine={fine:.9f} delta={delta:.3e}")
    return GridSlack(theta_coarse=coarse, theta_fine=fine, delta=delta)


def modify_semi_bernoulli(scenario: Scenario, params: PolicyParams) -> ModifiedScenario:
    """Move the mass at or below E_c onto {0, E_c}, preserving its mean.

    Args:
        scenario: Validated scenario.
        params: Solved parameters.

    Returns:
        ModifiedScenario with Pr(W = E_c) = E[E | E <= E_c] / E_c.
    """
    clipped = scenario.clipped
    e_c = params.e_c
    mass_low = clipped.mass_below(e_c)
    w_prob = min(1.0, clipped.conditional_mean_below(e_c) / e_c) if e_c > 0 else 0.0

    pairs = [
        (0.0, mass_low * (1.0 - w_prob)),
        (e_c, mass_low * w_prob),
    ]
    pairs.extend((v, p) for v, p in clipped.atoms if v > e_c + ENERGY_ATOL)
    distribution = DiscreteDistribution.from_pairs(
        [(v, p) for v, p in pairs if p > 0.0], tail_prob=clipped.tail_prob
    )
    return ModifiedScenario(base=scenario, distribution=distribution, w_prob=w_prob)


def block_reward(
    x: ArrayLike, s: int, scenario: Scenario, params: PolicyParams
) -> NDArray[np.float64]:
    """Per-slot Policy 1 reward r(x, s) of a block in reduced state (x, s)."""
    T = scenario.T
    q = params.q
    x = np.asarray(x, dtype=np.float64)
    if s == 0:
        head = awgn_rate_array(q * x)
        tail = awgn_rate_array(q * np.minimum(x, params.e_c))
    else:
        if T > 1:
            spend = np.minimum((T * x - scenario.b_bar) / (T - 1), scenario.b_bar)
            head = awgn_rate_array(np.maximum(spend, 0.0))
        else:
            head = np.zeros_like(x)
        tail = np.full_like(x, awgn_rate_array(q * params.e_c))
    return (T - 1) / T * head + tail / T


def finite_horizon_value(
    scenario: Scenario | ModifiedScenario,
    params: PolicyParams,
    N: int,
    grid: GridSpec | None = None,
) -> FiniteHorizonTable:
    """N-block total throughput J_N(x, s) of Policy 1 by backward recursion.

    Args:
        scenario: Arrivals to use (original or modified).
        params: Policy 1 parameters of the original scenario.
        N: Horizon in blocks.
        grid: Grid for x on [0, B].

    Returns:
        FiniteHorizonTable; off-grid successors are linearly interpolated.
    """
    if N < 1:
        raise ValueError(f"N must be >= 1, got {N}")
    grid = grid or GridSpec()
    if isinstance(scenario, ModifiedScenario):
        scenario = scenario.scenario
    T = scenario.T
    b_bar = scenario.b_bar
    e_c = params.e_c
    q = params.q
    dist = scenario.clipped
    x = np.linspace(0.0, b_bar, grid.n_battery)

    reward = np.column_stack(
        [block_reward(x, 0, scenario, params), block_reward(x, 1, scenario, params)]
    )
    settled = {0: np.minimum(x, e_c), 1: np.full_like(x, e_c)}
    successors: list[tuple[float, int, dict[int, _Weights]]] = []
    for e_next, prob in dist.atoms:
        s_next = int(e_next > e_c + ENERGY_ATOL)
        cap = (b_bar + (T - 1) * e_next) / T
        weights = {
            s: _interp_weights(x, np.minimum((1.0 - q) * settled[s] + e_next, cap))
            for s in (0, 1)
        }
        successors.append((prob, s_next, weights))

    J = reward.copy()
    for _ in range(N - 1):
        expected = np.zeros_like(J)
        for prob, s_next, weights in successors:
            for s in (0, 1):
                lo, w = weights[s]
                expected[:, s] += prob * _gather(J[:, s_next], lo, w)
        J = reward + expected
    return FiniteHorizonTable(horizon=N, x_grid=x, values=J)


def check_dominance(
    scenario: Scenario,
    params: PolicyParams,
    N: int,
    grid: GridSpec | None = None,
) -> DominanceReport:
    """Check J_N >= J_N(modified) on the grid.

    The tolerance is 1e-6 plus the interpolation slack measured by
    repeating both recursions on the doubled grid.
    """
    grid = grid or GridSpec()
    modified = modify_semi_bernoulli(scenario, params)

    original = finite_horizon_value(scenario, params, N, grid)
    worst = finite_horizon_value(modified, params, N, grid)
    violation = float(np.max(worst.values - original.values))

    slack = 0.0
    if N > 1:
        fine = grid.doubled()
        original_fine = finite_horizon_value(scenario, params, N, fine)
        worst_fine = finite_horizon_value(modified, params, N, fine)
        slack = float(
            np.max(np.abs(original_fine.values[::2] - original.values))
            + np.max(np.abs(worst_fine.values[::2] - worst.values))
        )

    report = DominanceReport(
        horizon=N,
        max_violation=violation,
        tolerance=DOMINANCE_TOL + slack,
        interpolation_slack=slack,
    )
    logger.debug(f"Dominance N={N}: {report}")
    return report


def reward_shape_violation(
    scenario: Scenario, params: PolicyParams, grid: GridSpec | None = None
) -> float:
    """Worst monotonicity or concavity defect of r(x, 0) and r(x, 1) on the grid.

    r(x, 1) is only inspected on x >= B/T, where its head power is positive.
    """
    grid = grid or GridSpec()
    x = np.linspace(0.0, scenario.b_bar, grid.n_battery)
    worst = 0.0
    for s in (0, 1):
        points = x if s == 0 else x[x >= scenario.b_bar / scenario.T]
        if points.size < 3:
            continue
        defects = monotone_concave_violation(
            points, block_reward(points, s, scenario, params)
        )
        worst = max(worst, defects["decrease"], defects["convexity"])
    return worst


def table_shape_violation(table: FiniteHorizonTable, scenario: Scenario) -> float:
    """Worst monotonicity or concavity defect of J_N(., 0) and J_N(., 1).

    Column s = 1 is inspected on x >= B/T only.
    """
    worst = 0.0
    for s in (0, 1):
        mask = (
            np.ones_like(table.x_grid, dtype=bool)
            if s == 0
            else table.x_grid >= scenario.b_bar / scenario.T
        )
        if mask.sum() < 3:
            continue
        defects = monotone_concave_violation(table.x_grid[mask], table.values[mask, s])
        worst = max(worst, defects["decrease"], defects["convexity"])
    return worst


def is_shape_preserving(violation: float) -> bool:
    """Whether a shape defect is within the concavity tolerance."""
    return violation <= CONCAVITY_TOL


def lemma_bernoulli_gap(
    values: ArrayLike,
    probs: ArrayLike,
    f_knots: ArrayLike,
    f_values: ArrayLike,
    z_max: float,
) -> float:
    """E[f(Z)] - E[f(Z_hat)] for piecewise-linear f and a two-point Z_hat.

    Z_hat takes the values 0 and z_max with Pr(Z_hat = z_max) = E[Z] / z_max;
    the gap is nonnegative whenever f is concave on [0, z_max].
    """
    z = np.asarray(values, dtype=np.float64)
    pz = np.asarray(probs, dtype=np.float64)
    knots = np.asarray(f_knots, dtype=np.float64)
    fk = np.asarray(f_values, dtype=np.float64)

    top = float(z @ pz) / z_max
    expected = float(np.interp(z, knots, fk) @ pz)
    two_point = (1.0 - top) * float(np.interp(0.0, knots, fk)) + top * float(
        np.interp(z_max, knots, fk)
    )
    return expected - two_point
