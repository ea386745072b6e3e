"""Utility functions for ehpc."""

from __future__ import annotations

import logging
import math
import os
from typing import Any

import numpy as np
from numpy.typing import ArrayLike, NDArray

from .constants import CSV_SIGNIFICANT_DIGITS, THREADS_ENV_VAR

logger = logging.getLogger(__name__)


def awgn_rate(g: float) -> float:
    """AWGN rate C(g) = 1/2 log2(1 + g) in bits."""
    return 0.5 * math.log2(1.0 + g)


def awgn_rate_array(g: ArrayLike) -> NDArray[np.float64]:
    """Vectorised AWGN rate in bits."""
    return 0.5 * np.log2(1.0 + np.asarray(g, dtype=np.float64))


def format_float(value: float | None) -> str:
    """Format a float with the fixed number of significant digits used in CSV.

    Args:
        value: The value to format, or None for an empty cell.

    Returns:
        String representation (empty for None).
    """
    if value is None:
        return ""
    return f"{value:.{CSV_SIGNIFICANT_DIGITS}g}"


def resolve_threads(requested: int | None = None) -> int:
    """Resolve the worker count from an explicit request or EHPC_THREADS.

    Args:
        requested: Explicit worker count (takes precedence when set).

    Returns:
        Positive worker count, at least 1.
    """
    if requested is not None:
        return max(1, int(requested))

    raw = os.environ.get(THREADS_ENV_VAR)
    if raw:
        try:
            return max(1, int(raw))
        except ValueError:
            logger.warning(
                f"Ignoring invalid {THREADS_ENV_VAR}={raw!r}"
            )
    return max(1, os.cpu_count() or 1)


def monotone_concave_violation(
    grid: ArrayLike, values: ArrayLike
) -> dict[str, Any]:
    """Measure how far a sampled function is from nondecreasing and concave.

    Args:
        grid: Increasing sample points.
        values: Function values at the sample points.

    Returns:
        Dictionary with the worst decrease and the worst positive slope jump.
    """
    x = np.asarray(grid, dtype=np.float64)
    y = np.asarray(values, dtype=np.float64)
    dy = np.diff(y)
    decrease = float(max(0.0, -dy.min())) if dy.size else 0.0

    if x.size < 3:
        return {"decrease": decrease, "convexity": 0.0}

    slopes = dy / np.diff(x)
    # Concave on a nonuniform grid means slopes never increase.
    jumps = np.diff(slopes) * np.diff(x)[1:]
    convexity = float(max(0.0, jumps.max()))
    return {"decrease": decrease, "convexity": convexity}
