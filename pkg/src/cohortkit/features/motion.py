"""Accelerometer summaries used by scenario checks (seizure motor signature)."""

from __future__ import annotations

import math

from .stats import sample_sd


def accel_magnitude_sd(samples: list[tuple[float, float, float, float]]) -> float | None:
    """Sample SD of |(x, y, z)| over (epoch, x, y, z) samples; None below 2 samples."""
    mags = [math.sqrt(x * x + y * y + z * z) for _, x, y, z in samples]
    return sample_sd(mags)
