"""Heart features: artifact-filtered IBI variability and percentile resting HR."""

from __future__ import annotations

import math

from .config import FeatureConfig
from .stats import mean, nearest_rank_percentile, sample_sd


def heart_features(
    ibi: list[tuple[float, float]],
    hr: list[tuple[float, float]],
    cfg: FeatureConfig = FeatureConfig(),
) -> dict:
    """RMSSD/SDNN from time-sorted (epoch, IBI ms) and resting HR from (epoch, bpm).

    IBI outside the physiological band is discarded; successive differences
    only count pairs adjacent in the kept sequence whose original gap stays
    under the pairing limit. Resting HR is the nearest-rank percentile of
    minute-mean HR and needs a minimum number of minute bins.
    """
    out = {"resting_hr_bpm": None, "rmssd_ms": None, "sdnn_ms": None}
    kept = [(t, v) for t, v in ibi if cfg.ibi_min_ms <= v <= cfg.ibi_max_ms]
    if len(kept) >= cfg.ibi_min_count:
        out["sdnn_ms"] = sample_sd([v for _, v in kept])
        sq = [
            (v2 - v1) ** 2
            for (t1, v1), (t2, v2) in zip(kept, kept[1:])
            if t2 - t1 < cfg.ibi_pair_max_gap_s
        ]
        if sq:
            out["rmssd_ms"] = math.sqrt(mean(sq))
    if hr:
        bins: dict[int, list[float]] = {}
        for t, bpm in hr:
            bins.setdefault(int(t // 60.0), []).append(bpm)
        if len(bins) >= cfg.resting_hr_min_minutes:
            minute_means = [mean(vs) for _, vs in sorted(bins.items())]
            out["resting_hr_bpm"] = nearest_rank_percentile(
                minute_means, cfg.resting_hr_percentile
            )
    return out
