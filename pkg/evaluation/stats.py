"""
Correlation statistics for cross-validated predictions
"""
import math
from typing import Sequence

import numpy as np
from scipy import special

from errors import Empty, LengthMismatch, OutOfRange, TooFew, ZeroVariance

# Smallest p-value reported; a perfect correlation has p = 0 analytically
P_FLOOR = np.finfo(np.float64).tiny


def pearson(x: Sequence[float], y: Sequence[float]) -> float:
    """Sample Pearson correlation coefficient"""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    if x.shape != y.shape or x.ndim != 1:
        raise LengthMismatch(f"vectors of different shape: {x.shape} vs {y.shape}")
    if x.shape[0] < 3:
        raise TooFew(f"need at least 3 paired values, got {x.shape[0]}")
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(np.dot(dx, dx))
    syy = float(np.dot(dy, dy))
    if sxx == 0.0 or syy == 0.0:
        raise ZeroVariance("correlation is undefined for a constant vector")
    r = float(np.dot(dx, dy)) / math.sqrt(sxx * syy)
    return min(1.0, max(-1.0, r))


def pearson_pvalue(r: float, n: int) -> float:
    """Two-sided p-value of the t-test for zero correlation.

    t = r sqrt((n - 2) / (1 - r^2)) with n - 2 degrees of freedom; the tail
    probability is the regularized incomplete beta I_{df/(df+t^2)}(df/2, 1/2).
    """
    if n < 3:
        raise TooFew(f"need at least 3 observations, got {n}")
    r = float(r)
    if not abs(r) <= 1.0:
        raise OutOfRange(f"correlation must lie in [-1, 1], got {r}")
    df = n - 2
    one_minus = 1.0 - r * r
    if one_minus <= 0.0:
        return float(P_FLOOR)
    # df / (df + t^2) simplifies to 1 - r^2
    p = float(special.betainc(0.5 * df, 0.5, one_minus))
    return float(min(1.0, max(P_FLOOR, p)))


def median(values: Sequence[float]) -> float:
    values = np.asarray(values, dtype=np.float64)
    if values.size == 0:
        raise Empty("median of an empty list")
    return float(np.median(values))


def combine_correlations(per_fold_r: Sequence[float]) -> float:
    """Median correlation across folds"""
    return median(per_fold_r)


def combine_pvalues(per_fold_p: Sequence[float]) -> float:
    """Twice the median p-value, capped at 1"""
    values = np.asarray(per_fold_p, dtype=np.float64)
    if values.size == 0:
        raise Empty("no p-values to combine")
    if np.any(~(values > 0.0)) or np.any(values > 1.0):
        raise OutOfRange("p-values must lie in (0, 1]")
    return min(1.0, 2.0 * median(values))
