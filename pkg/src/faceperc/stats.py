"""Small Monte Carlo helpers: binomial intervals and standard errors."""
from __future__ import annotations

import math

import numpy as np

Z95 = 1.959963984540054


def wilson_interval(successes: int, trials: int, z: float = Z95) -> tuple[float, float]:
    """Wilson score interval for a binomial proportion."""
    if trials <= 0:
        return (0.0, 1.0)
    p = successes / trials
    denom = 1 + z * z / trials
    center = (p + z * z / (2 * trials)) / denom
    half = z * math.sqrt(p * (1 - p) / trials + z * z / (4 * trials * trials)) / denom
    return (max(0.0, center - half), min(1.0, center + half))


def standard_error(bits) -> float:
    """Standard error of the mean of a 0/1 (or real) sample, ddof=1."""
    x = np.asarray(bits, dtype=float)
    if len(x) < 2:
        return float("nan")
    return float(np.std(x, ddof=1) / math.sqrt(len(x)))


def proportion_se(p: float, n: int) -> float:
    """Plug-in standard error of a proportion, floored at one success in ``n``."""
    if n <= 0:
        return float("nan")
    p_eff = min(max(p, 1.0 / n), 1 - 1.0 / n) if n > 1 else p
    return math.sqrt(p_eff * (1 - p_eff) / n)
