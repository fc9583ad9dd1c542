"""Shared statistic conventions: sample (n-1) variance/SD, natural-log entropy."""

from __future__ import annotations

import math


def mean(values) -> float:
    return sum(values) / len(values)


def sample_variance(values) -> float | None:
    n = len(values)
    if n < 2:
        return None
    m = mean(values)
    return sum((v - m) ** 2 for v in values) / (n - 1)


def sample_sd(values) -> float | None:
    var = sample_variance(values)
    return None if var is None else math.sqrt(var)


def shannon_entropy(weights) -> float:
    """Natural-log entropy of a weight vector (zero weights contribute nothing)."""
    total = float(sum(weights))
    if total <= 0.0:
        return 0.0
    h = 0.0
    for w in weights:
        if w > 0:
            p = w / total
            h -= p * math.log(p)
    return h


def median(values) -> float:
    s = sorted(values)
    n = len(s)
    mid = n // 2
    if n % 2:
        return float(s[mid])
    return (s[mid - 1] + s[mid]) / 2.0


def nearest_rank_percentile(values, pct: float) -> float:
    """Nearest-rank percentile: the ceil(pct/100 * n)-th smallest value."""
    s = sorted(values)
    rank = max(1, math.ceil(pct / 100.0 * len(s)))
    return float(s[rank - 1])
