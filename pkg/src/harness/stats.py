"""
Bootstrap confidence intervals over pool samples.
"""

from typing import Sequence, Tuple

import numpy as np

from src.utils.exceptions import ReportError

DEFAULT_RESAMPLES = 1000
DEFAULT_CONFIDENCE = 0.95


def bootstrap_ci(
    outcomes: Sequence[float],
    rng: np.random.Generator,
    resamples: int = DEFAULT_RESAMPLES,
    confidence: float = DEFAULT_CONFIDENCE,
) -> Tuple[float, float]:
    """
    Percentile bootstrap interval of the mean of ``outcomes``.

    Args:
        outcomes: Per-sample values (1.0 / 0.0 for success flags).
        rng: Generator of the resampling indices.
        resamples: Number of bootstrap resamples.
        confidence: Central coverage of the interval.

    Returns:
        (low, high); (0.0, 0.0) for an empty sample.
    """
    if resamples < 1 or not 0.0 < confidence <= 1.0:
        raise ReportError(f"Invalid bootstrap settings: resamples={resamples}, confidence={confidence}")
    values = np.asarray(outcomes, dtype=np.float64)
    if values.size == 0:
        return 0.0, 0.0
    indices = rng.integers(0, values.size, size=(resamples, values.size))
    means = values[indices].mean(axis=1)
    alpha = (1.0 - confidence) / 2.0
    low, high = np.quantile(means, [alpha, 1.0 - alpha])
    return float(low), float(high)
