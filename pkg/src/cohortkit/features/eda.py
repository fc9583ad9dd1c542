"""Electrodermal activity: level stats and response peaks over a baseline median."""

from __future__ import annotations

from .config import FeatureConfig
from .stats import mean, median, sample_sd


def _coverage_minutes(times) -> int:
    return len({int(t // 60.0) for t in times})


def count_peaks(samples: list[tuple[float, float]], cfg: FeatureConfig) -> int:
    """Strict local maxima rising above the centered rolling median, separated in time."""
    n = len(samples)
    half = cfg.eda_median_window_s / 2.0
    peaks = 0
    last_peak_t = None
    lo = 0
    hi = 0
    for i in range(1, n - 1):
        t, v = samples[i]
        if not (v > samples[i - 1][1] and v > samples[i + 1][1]):
            continue
        while lo < n and samples[lo][0] < t - half:
            lo += 1
        if hi < lo:
            hi = lo
        while hi < n and samples[hi][0] <= t + half:
            hi += 1
        baseline = median([v2 for _, v2 in samples[lo:hi]])
        if v <= baseline + cfg.eda_peak_rise_us:
            continue
        if last_peak_t is not None and t - last_peak_t < cfg.eda_peak_min_separation_s:
            continue
        peaks += 1
        last_peak_t = t
    return peaks


def eda_features(
    samples: list[tuple[float, float]],
    cfg: FeatureConfig = FeatureConfig(),
) -> dict:
    """Mean/SD microsiemens and peaks-per-minute from time-sorted (epoch, uS) samples."""
    out = {"eda_mean_us": None, "eda_sd_us": None, "eda_peaks_per_min": None}
    covered = _coverage_minutes([t for t, _ in samples])
    if covered < cfg.eda_min_coverage_min:
        return out
    values = [v for _, v in samples]
    out["eda_mean_us"] = mean(values)
    out["eda_sd_us"] = sample_sd(values)
    out["eda_peaks_per_min"] = count_peaks(samples, cfg) / covered
    return out
