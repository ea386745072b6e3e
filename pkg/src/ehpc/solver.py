"""Critical energy, Policy 1 parameters, closed-form bounds and the KKT certificate."""

from __future__ import annotations

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.optimize import bisect, minimize_scalar

from .constants import (
    BISECTION_MAXITER,
    BISECTION_XTOL,
    CAPACITY_GAP_CONSTANT,
    DEFAULT_KKT_STARTS,
    ENERGY_ATOL,
    HALF_LOG2_E,
    IDENTITY_TOL,
    KKT_ASCENT_TOL,
    KKT_OBJECTIVE_TOL,
    KKT_RESIDUAL_TOL,
)
from .exceptions import NoRegenerationError
from .scenario import DiscreteDistribution, Scenario, dist_stats
from .utils import awgn_rate

logger = logging.getLogger(__name__)

LN2 = math.log(2.0)
ASCENT_SWEEPS = 25
MAX_START_DRAWS = 1_000


@dataclass(frozen=True)
class PolicyParams:
    """Solved parameters driving Policy 1."""

    e_c: float
    q: float
    p: float
    p_prime: float
    mu_tilde: float


@dataclass(frozen=True)
class EpochStats:
    """Mean length (slots) and mean energy of a regeneration epoch."""

    tau: float
    eps: float

    @property
    def rate(self) -> float:
        return self.eps / self.tau


@dataclass(frozen=True)
class BoundsReport:
    """Throughput and capacity bounds in bits per slot."""

    theta_bar: float
    throughput_lower: float
    throughput_upper: float
    capacity_lower: float
    capacity_upper: float
    capacity_lower_unclamped: float
    entropy_bits: float


@dataclass(frozen=True)
class UpperBoundPoint:
    """A point of the upper-bound program; ``beta1`` is aligned with its atoms."""

    gamma: float
    beta: float
    beta0: float
    beta1: tuple[float, ...]


@dataclass
class KktCertificate:
    """Candidate optimum, duals and residuals of the upper-bound program."""

    gamma_star: float
    beta_star: float
    beta0_star: float
    beta1_star: dict[float, float]
    lambda0: float
    lambda1: dict[float, float]
    nu: float
    stationarity_residuals: dict[str, float]
    objective_value: float
    theta_bar: float
    lambda0_bound: float | None = None
    ascent_best: float | None = None
    trivial: bool = False
    relaxed: bool = False
    failures: list[str] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return not self.failures

    @property
    def max_residual(self) -> float:
        return max(self.stationarity_residuals.values(), default=0.0)


def critical_energy_residual(scenario: Scenario, x: float) -> float:
    """f(x) = B - T x + (T-1) E[min(E, x)] on the clipped distribution."""
    T = scenario.T
    return scenario.b_bar - T * x + (T - 1) * scenario.clipped.expected_min(x)


def _polish_root(scenario: Scenario, root: float) -> float:
    """Solve f exactly on the linear segment of f that contains ``root``."""
    T = scenario.T
    below = [(v, p) for v, p in scenario.clipped.atoms if v <= root]
    s_below = math.fsum(v * p for v, p in below)
    p_above = 1.0 - math.fsum(p for _, p in below)
    polished = (scenario.b_bar + (T - 1) * s_below) / (T - (T - 1) * p_above)

    if abs(polished - root) <= max(ENERGY_ATOL, 4 * BISECTION_XTOL):
        return min(max(polished, 0.0), scenario.b_bar)
    logger.debug(f"Polished root {polished} left the bracket around {root}")
    return root


def solve_critical_energy(scenario: Scenario) -> float:
    """Locate the unique root of f on [0, B].

    Args:
        scenario: Validated scenario.

    Returns:
        Critical energy level E_c.
    """
    b_bar = scenario.b_bar
    if scenario.T == 1:
        return b_bar

    f_top = critical_energy_residual(scenario, b_bar)
    if f_top >= 0.0:
        return b_bar

    root = bisect(
        lambda x: critical_energy_residual(scenario, x),
        0.0,
        b_bar,
        xtol=BISECTION_XTOL,
        maxiter=BISECTION_MAXITER,
    )
    e_c = _polish_root(scenario, float(root))
    logger.debug(f"E_c={e_c!r} (bisection {root!r})")
    return e_c


def scan_critical_energy(scenario: Scenario, n_points: int = 1_000_000) -> float:
    """Independent estimate of E_c from the sign change of f on a uniform grid.

    Args:
        scenario: Validated scenario.
        n_points: Number of grid points on [0, B].

    Returns:
        Root estimate, linearly interpolated inside the bracketing grid cell.
    """
    clipped = scenario.clipped
    T = scenario.T
    grid = np.linspace(0.0, scenario.b_bar, n_points)
    f = np.full(n_points, scenario.b_bar) - T * grid
    for value, prob in clipped.atoms:
        f += (T - 1) * prob * np.minimum(value, grid)

    nonpositive = np.flatnonzero(f <= 0.0)
    if nonpositive.size == 0:
        return scenario.b_bar
    k = int(nonpositive[0])
    if k == 0:
        return 0.0
    x0, x1, f0, f1 = grid[k - 1], grid[k], f[k - 1], f[k]
    return float(x0 + f0 * (x1 - x0) / (f0 - f1))


def fraction_of(dist: DiscreteDistribution, level: float) -> float:
    """E[min(E, level)] / level clipped to [0, 1]."""
    if level <= 0.0:
        return 0.0
    return min(1.0, dist.expected_min(level) / level)


def fixed_fraction_q(scenario: Scenario) -> float:
    """Fraction q_iid = E[min(E, B)] / B used by the Fixed Fraction Policy."""
    return fraction_of(scenario.clipped, scenario.b_bar)


def compute_params(scenario: Scenario) -> PolicyParams:
    """Solve for (E_c, q, p, p', mu_tilde).

    Args:
        scenario: Validated scenario.

    Returns:
        PolicyParams for Policy 1.
    """
    e_c = solve_critical_energy(scenario)
    q = fraction_of(scenario.clipped, e_c)
    if scenario.is_degenerate:
        logger.warning(f"All arrivals are 0: E_c = B/T = {e_c}, q = 0")

    raw = scenario.arrivals
    p = raw.mass_above(e_c)
    params = PolicyParams(
        e_c=e_c,
        q=q,
        p=p,
        p_prime=scenario.tail_prob,
        mu_tilde=0.0 if p >= 1.0 else raw.conditional_mean_below(e_c),
    )
    logger.debug(f"Solved {params}")
    return params


def check_consistency(scenario: Scenario, params: PolicyParams) -> dict[str, float]:
    """Residuals of the relations that jointly define E_c and q.

    Returns:
        Mapping with the defining-equation residual, the residual of
        E_c = B / (q + T(1 - q)) and the distance of q from [0, 1].
    """
    T = scenario.T
    q = params.q
    return {
        "defining_equation": abs(critical_energy_residual(scenario, params.e_c)),
        "alternate_form": abs(params.e_c - scenario.b_bar / (q + T * (1.0 - q))),
        "q_range": max(0.0, -q, q - 1.0),
    }


def epoch_stats(scenario: Scenario, params: PolicyParams) -> EpochStats:
    """Mean epoch length and energy between arrivals exceeding E_c.

    Raises:
        NoRegenerationError: If p = 0 (no arrival ever exceeds E_c).
    """
    if params.p <= 0.0:
        raise NoRegenerationError(
            "p = 0: no arrival exceeds E_c, epochs never regenerate"
        )
    T = scenario.T
    inv = 1.0 / params.p - 1.0
    return EpochStats(
        tau=1.0 + T * inv, eps=scenario.b_bar + inv * T * params.mu_tilde
    )


def epoch_identity_residual(stats: EpochStats, params: PolicyParams) -> float:
    """|eps/tau - q E_c|."""
    return abs(stats.rate - params.q * params.e_c)


def _large_arrival_rate(value: float, scenario: Scenario) -> float:
    T = scenario.T
    b_bar = scenario.b_bar
    return awgn_rate(min(value - (b_bar - value) / (T - 1), b_bar))


def theta_bar(scenario: Scenario, params: PolicyParams) -> float:
    """Approximate throughput in bits per slot.

    Args:
        scenario: Validated scenario.
        params: Solved parameters.

    Returns:
        The closed-form approximate throughput.
    """
    T = scenario.T
    p = params.p
    head = 0.0
    if T > 1:
        head = math.fsum(
            prob * _large_arrival_rate(value, scenario)
            for value, prob in scenario.arrivals.atoms
            if value > params.e_c + ENERGY_ATOL
        )
        head *= (T - 1) / T
    tail = (p + T * (1.0 - p)) / T * awgn_rate(params.q * params.e_c)
    return head + tail


def theta_bar_semi_bernoulli(scenario: Scenario, params: PolicyParams) -> float:
    """Approximate throughput written through q for semi-Bernoulli arrivals.

    Equals ``theta_bar`` whenever no atom lies strictly between 0 and E_c.
    """
    T = scenario.T
    q = params.q
    head = 0.0
    if T > 1 and q > 0.0:
        large = [
            (value, prob)
            for value, prob in scenario.arrivals.atoms
            if value >= params.e_c - ENERGY_ATOL
        ]
        conditional = math.fsum(
            prob * _large_arrival_rate(value, scenario) for value, prob in large
        ) / math.fsum(prob for _, prob in large)
        head = q * (T - 1) / T * conditional
    return head + (q + T * (1.0 - q)) / T * awgn_rate(q * params.e_c)


def throughput_bounds(
    scenario: Scenario, params: PolicyParams | None = None
) -> tuple[float, float]:
    """(theta_bar - 1/2 log2 e, theta_bar); the lower bound is not clamped."""
    params = params or compute_params(scenario)
    upper = theta_bar(scenario, params)
    return upper - HALF_LOG2_E, upper


def capacity_bounds(
    scenario: Scenario, params: PolicyParams | None = None
) -> tuple[float, float]:
    """(max(0, theta_bar - H/T - 1/2 log2(pi e^2 / 2)), theta_bar)."""
    report = bounds_report(scenario, params)
    return report.capacity_lower, report.capacity_upper


def bounds_report(
    scenario: Scenario, params: PolicyParams | None = None
) -> BoundsReport:
    """All closed-form bounds for a scenario."""
    params = params or compute_params(scenario)
    lower, upper = throughput_bounds(scenario, params)
    entropy_bits = dist_stats(scenario).entropy_bits
    capacity_lower = upper - entropy_bits / scenario.T - CAPACITY_GAP_CONSTANT
    return BoundsReport(
        theta_bar=upper,
        throughput_lower=lower,
        throughput_upper=upper,
        capacity_lower=max(0.0, capacity_lower),
        capacity_upper=upper,
        capacity_lower_unclamped=capacity_lower,
        entropy_bits=entropy_bits,
    )


class UpperBoundProgram:
    """The concave upper-bound program in natural-log units.

    Variables are (gamma, beta, beta0, beta1(x)) for the atoms x in (E_c, B].
    """

    def __init__(self, scenario: Scenario, params: PolicyParams):
        self.T = scenario.T
        self.b_bar = scenario.b_bar
        self.p = params.p
        self.p_prime = params.p_prime
        self.mu_tilde = params.mu_tilde
        self.a = params.p + (1.0 - params.p) * scenario.T

        middle = scenario.arrivals.atoms_between(params.e_c, scenario.b_bar)
        self.xs: NDArray[np.float64] = np.array([v for v, _ in middle])
        self.ps: NDArray[np.float64] = np.array([p for _, p in middle])

    @property
    def n_middle(self) -> int:
        return int(self.xs.size)

    def beta_of(self, beta0: float, beta1: NDArray[np.float64]) -> float:
        """Value of beta forced by the equality constraint."""
        return float(
            (1.0 - self.p) * beta0 + self.ps @ beta1 + self.p_prime * self.b_bar
        )

    def _arguments(
        self, gamma: float, beta: float, beta0: float, beta1: NDArray[np.float64]
    ) -> tuple[float, NDArray[np.float64]]:
        T = self.T
        d0 = 1.0 + (
            self.p * gamma + (1.0 - self.p) * (T * self.mu_tilde - beta0 + beta)
        ) / self.a
        if self.n_middle:
            dx = 1.0 + (T * self.xs - beta1 + beta - gamma) / (T - 1)
        else:
            dx = np.empty(0)
        return d0, dx

    def objective(
        self, gamma: float, beta: float, beta0: float, beta1: NDArray[np.float64]
    ) -> float:
        """Objective in nats (C(x) = ln(1 + x)); -inf outside the log domain."""
        T = self.T
        d0, dx = self._arguments(gamma, beta, beta0, beta1)
        if d0 <= 0.0 or np.any(dx <= 0.0):
            return -math.inf
        value = self.a / T * math.log(d0)
        if self.n_middle:
            value += (T - 1) / T * float(self.ps @ np.log(dx))
        value += self.p_prime * (T - 1) / T * math.log1p(self.b_bar)
        return value

    def gradient(
        self, gamma: float, beta: float, beta0: float, beta1: NDArray[np.float64]
    ) -> dict[str, float | NDArray[np.float64]]:
        T = self.T
        d0, dx = self._arguments(gamma, beta, beta0, beta1)
        spread = self.ps / (T * dx) if self.n_middle else np.empty(0)
        return {
            "gamma": self.p / (T * d0) - float(spread.sum()),
            "beta": (1.0 - self.p) / (T * d0) + float(spread.sum()),
            "beta0": -(1.0 - self.p) / (T * d0),
            "beta1": -spread,
        }

    def feasible(
        self, gamma: float, beta0: float, beta1: NDArray[np.float64]
    ) -> bool:
        return gamma <= self.beta_of(beta0, beta1) + 1e-15 and bool(
            np.all(beta1 <= self.b_bar)
        )


def upper_bound_objective(
    scenario: Scenario, params: PolicyParams, point: UpperBoundPoint
) -> float:
    """Objective of the upper-bound program at ``point`` in bits per slot."""
    program = UpperBoundProgram(scenario, params)
    beta1 = np.asarray(point.beta1, dtype=np.float64)
    nats = program.objective(point.gamma, point.beta, point.beta0, beta1)
    return nats / (2.0 * LN2)


def _coordinate_ascent(
    program: UpperBoundProgram,
    gamma: float,
    beta0: float,
    beta1: NDArray[np.float64],
) -> float:
    b_bar = program.b_bar
    one_minus_p = 1.0 - program.p

    def value(g: float, b0: float, b1: NDArray[np.float64]) -> float:
        if not program.feasible(g, b0, b1):
            return -math.inf
        return program.objective(g, program.beta_of(b0, b1), b0, b1)

    def maximize(
        fn: Callable[[float], float], lo: float, hi: float, current: float
    ) -> float:
        if hi - lo <= 0.0:
            return current

        def negated(t: float) -> float:
            v = fn(t)
            return 1e300 if not math.isfinite(v) else -v

        result = minimize_scalar(negated, bounds=(lo, hi), method="bounded")
        candidate = float(result.x)
        return candidate if -result.fun > fn(current) else current

    best = value(gamma, beta0, beta1)
    for _ in range(ASCENT_SWEEPS):
        before = best
        beta = program.beta_of(beta0, beta1)
        gamma = maximize(
            lambda g: value(g, beta0, beta1), 0.0, min(beta, b_bar), gamma
        )

        if one_minus_p > 0.0:
            rest = program.beta_of(0.0, beta1)
            lo = min(max(0.0, (gamma - rest) / one_minus_p), b_bar)
            beta0 = maximize(lambda b0: value(gamma, b0, beta1), lo, b_bar, beta0)

        for k in range(program.n_middle):

            def along(t: float, k: int = k) -> float:
                trial = beta1.copy()
                trial[k] = t
                return value(gamma, beta0, trial)

            beta1[k] = maximize(along, 0.0, b_bar, float(beta1[k]))

        best = value(gamma, beta0, beta1)
        if best - before <= 1e-14:
            break
    return best


def _ascent_cross_check(
    program: UpperBoundProgram, n_starts: int, seed: int
) -> float:
    """Best objective (nats) reached by coordinate ascent from random starts."""
    rng = np.random.Generator(np.random.Philox(key=seed))
    b_bar = program.b_bar
    best = -math.inf
    for _ in range(n_starts):
        for _ in range(MAX_START_DRAWS):
            beta0 = float(rng.uniform(0.0, b_bar))
            beta1 = rng.uniform(0.0, b_bar, size=program.n_middle)
            beta = program.beta_of(beta0, beta1)
            gamma = float(rng.uniform(0.0, min(beta, b_bar)))
            if math.isfinite(program.objective(gamma, beta, beta0, beta1)):
                break
        else:
            continue
        best = max(best, _coordinate_ascent(program, gamma, beta0, beta1))
    return best


def verify_kkt(
    scenario: Scenario,
    params: PolicyParams | None = None,
    n_starts: int = DEFAULT_KKT_STARTS,
    seed: int = 0,
) -> KktCertificate:
    """Certify the closed-form optimum of the upper-bound program.

    Args:
        scenario: Validated scenario.
        params: Parameters under test (solved from the scenario by default).
        n_starts: Random starting points for the coordinate-ascent cross-check.
        seed: Seed for the starting points.

    Returns:
        KktCertificate; ``failures`` lists every violated condition.
    """
    params = params or compute_params(scenario)
    target = theta_bar(scenario, params)
    b_bar = scenario.b_bar
    T = scenario.T
    p = params.p

    if p <= 0.0:
        objective = awgn_rate(scenario.clipped.expected_min(params.e_c))
        certificate = KktCertificate(
            gamma_star=0.0,
            beta_star=0.0,
            beta0_star=0.0,
            beta1_star={},
            lambda0=0.0,
            lambda1={},
            nu=0.0,
            stationarity_residuals={},
            objective_value=objective,
            theta_bar=target,
            trivial=True,
        )
        if abs(objective - target) > KKT_OBJECTIVE_TOL:
            certificate.failures.append(
                f"objective {objective:.12g} differs from theta_bar {target:.12g}"
            )
        logger.info("p = 0: trivial certificate")
        return certificate

    program = UpperBoundProgram(scenario, params)
    gamma = beta = p * b_bar
    beta0 = 0.0
    beta1 = np.full(program.n_middle, b_bar)

    a = program.a
    denom0 = a + p * b_bar + (1.0 - p) * T * params.mu_tilde
    spread = program.ps / (T - 1 + T * program.xs - b_bar) if program.n_middle else []
    lambda0 = a / T * p / denom0 - (T - 1) / T * float(np.sum(spread))
    nu = -(1.0 / T) * a / denom0
    lambda1 = (
        program.ps * (-nu - (1.0 / T) * (T - 1) / (T - 1 + T * program.xs - b_bar))
        if program.n_middle
        else np.empty(0)
    )

    grad = program.gradient(gamma, beta, beta0, beta1)
    residuals = {
        "gamma": abs(float(grad["gamma"]) - lambda0),
        "beta": abs(float(grad["beta"]) + lambda0 + nu),
        "beta0": abs(float(grad["beta0"]) - (1.0 - p) * nu),
    }
    beta1_grad = np.asarray(grad["beta1"])
    for k, x in enumerate(program.xs):
        residuals[f"beta1({x:g})"] = abs(
            float(beta1_grad[k]) - float(lambda1[k]) - nu * float(program.ps[k])
        )

    objective = program.objective(gamma, beta, beta0, beta1) / (2.0 * LN2)
    certificate = KktCertificate(
        gamma_star=gamma,
        beta_star=beta,
        beta0_star=beta0,
        beta1_star={float(x): b_bar for x in program.xs},
        lambda0=lambda0,
        lambda1={float(x): float(v) for x, v in zip(program.xs, lambda1)},
        nu=nu,
        stationarity_residuals=residuals,
        objective_value=objective,
        theta_bar=target,
    )

    failures = certificate.failures
    if abs(program.beta_of(beta0, beta1) - beta) > IDENTITY_TOL * max(1.0, b_bar):
        failures.append("candidate violates the equality constraint")

    m = (1.0 - p) * params.mu_tilde + p * params.e_c
    if params.p_prime > 0.0:
        bound = params.p_prime / (T * (1.0 + m))
        certificate.lambda0_bound = bound
        if lambda0 < bound - KKT_RESIDUAL_TOL:
            failures.append(f"lambda0={lambda0:.3e} below its lower bound {bound:.3e}")
    else:
        certificate.relaxed = True
        logger.warning("p' = 0: checking lambda0 >= 0 only")
        if lambda0 < -KKT_RESIDUAL_TOL:
            failures.append(f"lambda0={lambda0:.3e} is negative")

    for x, value in certificate.lambda1.items():
        if value < -KKT_RESIDUAL_TOL:
            failures.append(f"lambda1({x:g})={value:.3e} is negative")

    worst = certificate.max_residual
    if worst >= KKT_RESIDUAL_TOL:
        failures.append(f"stationarity residual {worst:.3e}")

    if abs(objective - target) > KKT_OBJECTIVE_TOL:
        failures.append(
            f"objective {objective:.12g} differs from theta_bar {target:.12g}"
        )

    if n_starts > 0:
        best = _ascent_cross_check(program, n_starts, seed) / (2.0 * LN2)
        certificate.ascent_best = best
        if best > objective + KKT_ASCENT_TOL:
            failures.append(
                f"coordinate ascent reached {best:.12g} above {objective:.12g}"
            )

    logger.debug(f"KKT certificate: lambda0={lambda0}, residual={worst:.3e}")
    return certificate
