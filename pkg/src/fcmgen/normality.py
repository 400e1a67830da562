"""D'Agostino-Pearson omnibus normality test.

The skewness statistic is transformed with D'Agostino's (1970) approximation and
the kurtosis statistic with Anscombe & Glass (1983); their squared z-scores are
summed into K^2, which is chi-squared with 2 degrees of freedom under normality.
"""

from __future__ import annotations

import math

import numpy as np

__all__ = ["dagostino_pearson", "skew_z", "kurtosis_z", "MIN_SAMPLE"]

MIN_SAMPLE = 20


def _moments(x):
    if np.all(x == x[0]):
        raise ValueError("sample has zero variance")
    d = x - x.mean()
    m2 = np.mean(d**2)
    return m2, np.mean(d**3), np.mean(d**4)


def skew_z(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    m2, m3, _ = _moments(x)
    b1 = m3 / m2**1.5
    y = b1 * math.sqrt((n + 1) * (n + 3) / (6.0 * (n - 2)))
    beta2 = 3.0 * (n * n + 27 * n - 70) * (n + 1) * (n + 3) / ((n - 2.0) * (n + 5) * (n + 7) * (n + 9))
    w2 = -1.0 + math.sqrt(2.0 * (beta2 - 1.0))
    delta = 1.0 / math.sqrt(0.5 * math.log(w2))
    alpha = math.sqrt(2.0 / (w2 - 1.0))
    ya = y / alpha
    return delta * math.log(ya + math.sqrt(ya * ya + 1.0))


def kurtosis_z(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    n = x.size
    m2, _, m4 = _moments(x)
    b2 = m4 / m2**2
    mean_b2 = 3.0 * (n - 1) / (n + 1)
    var_b2 = 24.0 * n * (n - 2) * (n - 3) / ((n + 1.0) ** 2 * (n + 3) * (n + 5))
    std_x = (b2 - mean_b2) / math.sqrt(var_b2)
    sqrt_beta1 = (
        6.0 * (n * n - 5 * n + 2) / ((n + 7.0) * (n + 9))
        * math.sqrt(6.0 * (n + 3) * (n + 5) / (n * (n - 2.0) * (n - 3)))
    )
    a = 6.0 + 8.0 / sqrt_beta1 * (2.0 / sqrt_beta1 + math.sqrt(1.0 + 4.0 / sqrt_beta1**2))
    term1 = 1.0 - 2.0 / (9.0 * a)
    denom = 1.0 + std_x * math.sqrt(2.0 / (a - 4.0))
    if denom == 0:
        return math.inf if std_x > 0 else -math.inf
    term2 = math.copysign(abs((1.0 - 2.0 / a) / denom) ** (1.0 / 3.0), denom)
    return (term1 - term2) / math.sqrt(2.0 / (9.0 * a))


def dagostino_pearson(sample) -> tuple:
    """Return ``(K2, p_value)`` for the hypothesis that ``sample`` is normal."""
    x = np.asarray(sample, dtype=np.float64).ravel()
    if x.size < MIN_SAMPLE:
        raise ValueError(f"need at least {MIN_SAMPLE} observations, got {x.size}")
    if not np.all(np.isfinite(x)):
        raise ValueError("sample contains non-finite values")
    k2 = skew_z(x) ** 2 + kurtosis_z(x) ** 2
    # chi-squared survival function with 2 degrees of freedom
    return k2, math.exp(-k2 / 2.0)
