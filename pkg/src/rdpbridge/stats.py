"""Binomial confidence intervals."""

from __future__ import annotations

from typing import Tuple

import numpy as np
from scipy.stats import beta


def clopper_pearson(k, n: int, level: float = 0.95) -> Tuple[np.ndarray, np.ndarray]:
    """Exact two-sided Clopper-Pearson interval for ``k`` successes in ``n``.

    ``k`` may be an array; the bounds are returned with the same shape.
    """
    k = np.asarray(k, dtype=float)
    a = (1.0 - level) / 2.0
    with np.errstate(invalid="ignore"):
        lo = np.where(k > 0, beta.ppf(a, k, n - k + 1), 0.0)
        hi = np.where(k < n, beta.ppf(1 - a, k + 1, n - k), 1.0)
    return np.nan_to_num(lo, nan=0.0), np.nan_to_num(hi, nan=1.0)
