"""Constants, enums, and configuration defaults for ehpc."""

import math
from enum import Enum

# Probability mass checks
LOAD_PROB_TOLERANCE = 1e-9
DIST_PROB_TOLERANCE = 1e-12

# Energy comparisons (atom classification against E_c and B)
ENERGY_ATOL = 1e-9

# Root finding for the critical energy level
BISECTION_XTOL = 1e-12
BISECTION_MAXITER = 200

# Feasibility slack on g <= b comparisons
FEASIBILITY_TOL = 1e-12

# Policy guard clamps larger than this are logged
CLAMP_LOG_THRESHOLD = 1e-12

# Certificates and identities
KKT_RESIDUAL_TOL = 1e-9
KKT_OBJECTIVE_TOL = 1e-9
KKT_ASCENT_TOL = 1e-7
IDENTITY_TOL = 1e-9
DOMINANCE_TOL = 1e-6
SERIES_TAIL_TOL = 1e-12
CONCAVITY_TOL = 1e-9

# Rate constants (bits)
HALF_LOG2_E = 0.5 * math.log2(math.e)
CAPACITY_GAP_CONSTANT = 0.5 * math.log2(math.pi * math.e**2 / 2.0)

# Run defaults
DEFAULT_BLOCKS = 100_000
DEFAULT_REPS = 16
DEFAULT_BURN_IN = 1_000
DEFAULT_SEED = 0
DEFAULT_GRID = 512
DEFAULT_ACTION_GRID = 64
DEFAULT_VI_TOL = 1e-6
DEFAULT_VI_MAX_ITER = 20_000
DEFAULT_VERIFY_BLOCKS = 20_000
DEFAULT_VERIFY_REPS = 8
DEFAULT_DOMINANCE_HORIZONS = (1, 2, 4, 8)
DEFAULT_UNIFORMIZATION_SAMPLES = 1_000
DEFAULT_KKT_STARTS = 50
MIN_BATTERY_GRID = 16

# Environment
THREADS_ENV_VAR = "EHPC_THREADS"
CONFIG_FILENAME = "ehpcconfig.json"

# Output
CSV_SIGNIFICANT_DIGITS = 12
RUN_RECORD_COLUMNS = (
    "scenario_id",
    "T",
    "B",
    "policy",
    "horizon_blocks",
    "reps",
    "mean_bits",
    "stderr_bits",
    "theta_bar",
    "lower_bound",
    "theta_vi",
    "wall_time_s",
)

# Exit codes
EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_INPUT_ERROR = 2


class PolicyKind(Enum):
    """Online power control policies."""

    BLOCK_FFP = "block_ffp"
    FIXED_FRACTION = "fixed_fraction"
    GREEDY = "greedy"
    CONSTANT_MEAN = "constant_mean"
    NAIVE_BLOCK = "naive_block"


POLICY_ALIASES = {
    "p1": PolicyKind.BLOCK_FFP,
    "policy1": PolicyKind.BLOCK_FFP,
    "ffp": PolicyKind.FIXED_FRACTION,
    "mean": PolicyKind.CONSTANT_MEAN,
    "naive": PolicyKind.NAIVE_BLOCK,
}
