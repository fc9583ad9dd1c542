"""Single declared-defaults block for every feature-pipeline constant.

The feature names come from the platform's biomarker catalog; their exact
numeric definitions are ours, so each threshold is declared here once,
overridable per project, and dumped verbatim into the provenance sidecar.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

from ..errors import ConfigError


@dataclass(frozen=True)
class FeatureConfig:
    # sleep period detection
    sleep_gap_max_min: float = 60.0          # bouts closer than this merge into one period
    sleep_min_total_min: float = 180.0       # shorter candidates (naps) are discarded
    sleep_start_earliest_hour: float = -6.0  # 18:00 previous local day, relative to midnight
    sleep_start_latest_hour: float = 12.0    # noon of the window day
    midpoint_reference_min: float = 180.0    # circular midpoint scale centered at 03:00
    variability_min_days: int = 7

    # location clustering
    cluster_radius_m: float = 300.0
    speed_gate_ms: float = 1.0               # slower than this = stationary
    dwell_cap_s: float = 600.0               # one inter-sample gap credits at most 10 min
    night_start_hour: float = 0.0
    night_end_hour: float = 6.0
    location_variance_floor: float = 1e-12

    # heart
    ibi_min_ms: float = 300.0
    ibi_max_ms: float = 2000.0
    ibi_pair_max_gap_s: float = 5.0
    ibi_min_count: int = 10
    resting_hr_percentile: float = 5.0
    resting_hr_min_minutes: int = 600

    # steps
    step_epoch_seconds: int = 60
    nonstop_min_steps: int = 60
    moderate_band_low: int = 60
    moderate_band_high: int = 115

    # electrodermal activity
    eda_peak_rise_us: float = 0.05
    eda_peak_min_separation_s: float = 1.0
    eda_median_window_s: float = 60.0
    eda_min_coverage_min: int = 5

    # NBDC periodicity
    freq_window_days: int = 7
    freq_gap_interp_max_h: int = 3
    freq_min_slot_fraction: float = 0.8

    def with_overrides(self, overrides: dict) -> "FeatureConfig":
        names = {f.name: f.type for f in dataclasses.fields(self)}
        coerced = {}
        for key, value in overrides.items():
            if key not in names:
                raise ConfigError(f"unknown feature constant {key!r}")
            current = getattr(self, key)
            coerced[key] = type(current)(value)
        return dataclasses.replace(self, **coerced)

    def provenance_text(self) -> str:
        lines = [
            f"{f.name} = {getattr(self, f.name)!r}"
            for f in sorted(dataclasses.fields(self), key=lambda f: f.name)
        ]
        return "\n".join(lines) + "\n"
