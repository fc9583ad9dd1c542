"""Nearby-Bluetooth-device-count features: daily distribution stats and periodicity.

The periodicity features resample scans to hourly means over a multi-day
window, interpolate short gaps, and take a discrete-Fourier periodogram of
the mean-centered series; output is the power share of the bin nearest a
24 h period and the period of the strongest bin.
"""

from __future__ import annotations

from collections import Counter

import numpy as np

from .config import FeatureConfig
from .stats import mean, sample_sd, shannon_entropy


def nbdc_features(counts: list[int]) -> dict:
    out = {
        "nbdc_max": None,
        "nbdc_min": None,
        "nbdc_mean": None,
        "nbdc_sd": None,
        "nbdc_entropy": None,
    }
    if not counts:
        return out
    out["nbdc_max"] = max(counts)
    out["nbdc_min"] = min(counts)
    out["nbdc_mean"] = mean(counts)
    out["nbdc_sd"] = sample_sd(counts)
    out["nbdc_entropy"] = shannon_entropy(list(Counter(counts).values()))
    return out


def hourly_means(
    scans: list[tuple[float, float]], start_epoch: float, n_hours: int
) -> list[float | None]:
    """Mean scan value per hour slot of [start, start + n_hours*3600); None = no data."""
    sums = [0.0] * n_hours
    counts = [0] * n_hours
    for t, value in scans:
        slot = int((t - start_epoch) // 3600.0)
        if 0 <= slot < n_hours:
            sums[slot] += value
            counts[slot] += 1
    return [sums[i] / counts[i] if counts[i] else None for i in range(n_hours)]


def _interpolate_gaps(slots: list[float | None], max_gap: int) -> list[float | None]:
    """Linearly fill interior gaps of at most max_gap slots; longer gaps stay dropped."""
    out = list(slots)
    known = [i for i, v in enumerate(slots) if v is not None]
    for left, right in zip(known, known[1:]):
        gap = right - left - 1
        if 0 < gap <= max_gap:
            step = (slots[right] - slots[left]) / (right - left)
            for j in range(left + 1, right):
                out[j] = slots[left] + step * (j - left)
    return out


def nbdc_frequency_features(
    scans: list[tuple[float, float]],
    start_epoch: float,
    n_hours: int,
    cfg: FeatureConfig = FeatureConfig(),
) -> dict:
    out = {"nbdc_power24h_fraction": None, "nbdc_dominant_period_h": None}
    if n_hours < cfg.freq_window_days * 24:
        return out
    slots = _interpolate_gaps(
        hourly_means(scans, start_epoch, n_hours), cfg.freq_gap_interp_max_h
    )
    present = [v for v in slots if v is not None]
    if len(present) < cfg.freq_min_slot_fraction * n_hours:
        return out
    series_mean = mean(present)
    # dropped slots sit at the mean, i.e. zero once centered
    centered = np.array(
        [(v - series_mean) if v is not None else 0.0 for v in slots], dtype=float
    )
    spectrum = np.fft.rfft(centered)
    power = np.abs(spectrum) ** 2
    power[0] = 0.0
    total = float(power.sum())
    if total <= 0.0:
        return out
    bins = np.arange(1, len(power))
    periods = n_hours / bins
    nearest_24h = int(bins[np.argmin(np.abs(periods - 24.0))])
    out["nbdc_power24h_fraction"] = float(power[nearest_24h] / total)
    dominant = int(bins[np.argmax(power[1:])])
    out["nbdc_dominant_period_h"] = float(n_hours / dominant)
    return out
