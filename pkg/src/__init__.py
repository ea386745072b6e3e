"""ehpc - Online power control toolkit for energy-harvesting transmitters."""

from .ehpc import (
    DiscreteDistribution,
    PolicyKind,
    RunConfig,
    Scenario,
    __version__,
    compute_params,
    load_scenario,
    main,
)

__all__ = [
    "__version__",
    "main",
    "RunConfig",
    "PolicyKind",
    "DiscreteDistribution",
    "Scenario",
    "load_scenario",
    "compute_params",
]
