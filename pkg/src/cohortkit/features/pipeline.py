"""Per-participant-day feature assembly over the topic log, plus the matrix file.

For each local date the pipeline slices every topic's records by event time,
computes all feature families, and records per-modality coverage hours.
Multi-day features (sleep variability, NBDC periodicity) attach to the last
date of their trailing window. Absent streams yield nulls; present streams
showing no activity yield zeros.
"""

from __future__ import annotations

import csv
import datetime as _dt
from bisect import bisect_left
from dataclasses import dataclass, field
from operator import itemgetter
from pathlib import Path

from ..timeutil import DAY_SECONDS, local_date, local_midnight_epoch
from .cardiac import heart_features
from .config import FeatureConfig
from .eda import eda_features
from .location import fit_location_clusters, infer_home_cluster, location_features
from .nbdc import nbdc_features, nbdc_frequency_features
from .phone import phone_use_features, step_features
from .sleep import StageBout, detect_sleep_period, sleep_features, sleep_variability

FEATURE_COLUMNS = [
    "sleep_tst_min",
    "sleep_sol_min",
    "sleep_efficiency",
    "sleep_midpoint_min",
    "sleep_fragmentation_index",
    "sleep_midpoint_variance",
    "sleep_sol_variance",
    "social_jetlag_min",
    "location_variance",
    "location_clusters",
    "location_entropy",
    "location_entropy_normalized",
    "homestay",
    "moving_time_min",
    "moving_distance_m",
    "nbdc_max",
    "nbdc_min",
    "nbdc_mean",
    "nbdc_sd",
    "nbdc_entropy",
    "nbdc_power24h_fraction",
    "nbdc_dominant_period_h",
    "unlock_count",
    "unlock_dur_min_min",
    "unlock_dur_max_min",
    "unlock_dur_median_min",
    "inter_unlock_median_min",
    "daily_step_sum",
    "max_nonstop_duration_min",
    "max_nonstop_steps",
    "moderate_walking_min",
    "resting_hr_bpm",
    "rmssd_ms",
    "sdnn_ms",
    "eda_mean_us",
    "eda_sd_us",
    "eda_peaks_per_min",
]

# catalog order; every topic gets a coverage column even when featureless
MODALITY_TOPICS = [
    "phone_acceleration",
    "phone_light",
    "phone_relative_location",
    "phone_bluetooth_devices",
    "phone_usage_event",
    "phone_step_count",
    "wearable_bvp",
    "wearable_ibi",
    "wearable_eda",
    "wearable_temperature",
    "wearable_heart_rate",
    "vendor_sleep_stage",
    "vendor_intraday_steps",
    "vendor_resting_heart_rate",
    "questionnaire_response",
]

_EXTRACTORS = {
    "phone_relative_location": ("latitude", "longitude"),
    "phone_bluetooth_devices": ("count",),
    "phone_usage_event": ("event",),
    "phone_step_count": ("steps",),
    "wearable_ibi": ("intervalMs",),
    "wearable_heart_rate": ("bpm",),
    "wearable_eda": ("microsiemens",),
    "vendor_sleep_stage": ("stage", "durationSeconds"),
    "phone_acceleration": ("x", "y", "z"),
}


@dataclass(frozen=True)
class DailyWindow:
    user_id: str
    date: _dt.date
    start_epoch: float
    end_epoch: float


@dataclass
class FeatureVector:
    user_id: str
    date: _dt.date
    values: dict = field(default_factory=dict)
    coverage: dict = field(default_factory=dict)


def daily_window(user_id: str, date: _dt.date, tz_offset_min: int) -> DailyWindow:
    start = local_midnight_epoch(date, tz_offset_min)
    return DailyWindow(user_id, date, start, start + DAY_SECONDS)


def collect_user_streams(store, user_ids, project_id=None) -> dict:
    """One pass over every topic: per-user, per-topic time-sorted value tuples.

    Tuples start with the event time; extra elements are the topic's feature
    payload fields. Sorting uses the whole tuple so equal-time records order
    deterministically regardless of log interleaving.
    """
    wanted = set(user_ids)
    data = {u: {t: [] for t in MODALITY_TOPICS} for u in wanted}
    for topic in MODALITY_TOPICS:
        if not store.has_topic(topic):
            continue
        fields = _EXTRACTORS.get(topic, ())
        for _, record in store.read_all(topic):
            if record.key.user_id not in wanted:
                continue
            if project_id is not None and record.key.project_id != project_id:
                continue
            row = (record.time,) + tuple(record.payload.get(f) for f in fields)
            data[record.key.user_id][topic].append(row)
    for streams in data.values():
        for rows in streams.values():
            rows.sort()
    return data


def _slice(rows, t0: float, t1: float):
    lo = bisect_left(rows, t0, key=itemgetter(0))
    hi = bisect_left(rows, t1, key=itemgetter(0))
    return rows[lo:hi]


def _coverage_hours(rows, window: DailyWindow) -> int:
    return len({int((t[0] - window.start_epoch) // 3600.0) for t in _slice(rows, window.start_epoch, window.end_epoch)})


def compute_user_features(
    streams: dict,
    user_id: str,
    tz_offset_min: int,
    dates: list[_dt.date],
    cfg: FeatureConfig = FeatureConfig(),
) -> list[FeatureVector]:
    bouts_all = [
        StageBout(stage, t, float(dur)) for t, stage, dur in streams["vendor_sleep_stage"]
    ]
    bouts_all.sort(key=lambda b: b.start)
    vectors = []
    nightly: list[tuple[_dt.date, float, float] | None] = []
    for index, date in enumerate(dates):
        window = daily_window(user_id, date, tz_offset_min)
        values = {name: None for name in FEATURE_COLUMNS}

        stage_rows = [
            b
            for b in bouts_all
            if window.start_epoch - DAY_SECONDS <= b.start < window.end_epoch
        ]
        period = detect_sleep_period(stage_rows, window.start_epoch, cfg)
        if period is not None:
            values.update(sleep_features(period, window.start_epoch))
            nightly.append(
                (date, values["sleep_midpoint_min"], values["sleep_sol_min"])
            )
        else:
            nightly.append(None)
        if index + 1 >= cfg.variability_min_days:
            recent = [
                n for n in nightly[index + 1 - cfg.variability_min_days : index + 1] if n
            ]
            values.update(sleep_variability(recent, cfg))

        loc_rows = _slice(
            streams["phone_relative_location"], window.start_epoch, window.end_epoch
        )
        points = [(lat, lon, t) for t, lat, lon in loc_rows]
        model = fit_location_clusters(points, cfg)
        model.home_cluster = infer_home_cluster(model, points, tz_offset_min, cfg)
        values.update(location_features(points, model, cfg))

        nbdc_rows = _slice(
            streams["phone_bluetooth_devices"], window.start_epoch, window.end_epoch
        )
        values.update(nbdc_features([c for _, c in nbdc_rows]))
        if index + 1 >= cfg.freq_window_days:
            span_start = window.end_epoch - cfg.freq_window_days * DAY_SECONDS
            week_rows = _slice(
                streams["phone_bluetooth_devices"], span_start, window.end_epoch
            )
            values.update(
                nbdc_frequency_features(
                    [(t, float(c)) for t, c in week_rows],
                    span_start,
                    cfg.freq_window_days * 24,
                    cfg,
                )
            )

        usage_rows = _slice(
            streams["phone_usage_event"], window.start_epoch, window.end_epoch
        )
        values.update(phone_use_features(list(usage_rows), window.end_epoch))

        step_rows = _slice(streams["phone_step_count"], window.start_epoch, window.end_epoch)
        if step_rows:
            values.update(step_features([(t, s) for t, s in step_rows], cfg))

        ibi_rows = _slice(streams["wearable_ibi"], window.start_epoch, window.end_epoch)
        hr_rows = _slice(streams["wearable_heart_rate"], window.start_epoch, window.end_epoch)
        values.update(heart_features(list(ibi_rows), list(hr_rows), cfg))

        eda_rows = _slice(streams["wearable_eda"], window.start_epoch, window.end_epoch)
        values.update(eda_features(list(eda_rows), cfg))

        coverage = {
            topic: _coverage_hours(streams[topic], window) for topic in MODALITY_TOPICS
        }
        vectors.append(FeatureVector(user_id, date, values, coverage))
    return vectors


def run_pipeline(
    store,
    user_id: str,
    tz_offset_min: int,
    dates: list[_dt.date],
    cfg: FeatureConfig = FeatureConfig(),
    project_id: str | None = None,
) -> list[FeatureVector]:
    """Feature vectors for one participant across the given local dates."""
    streams = collect_user_streams(store, [user_id], project_id)[user_id]
    return compute_user_features(streams, user_id, tz_offset_min, dates, cfg)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return str(int(value))
    if isinstance(value, int):
        return str(value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_matrix(vectors: list[FeatureVector], path) -> None:
    """Deterministic CSV: one row per (userId, localDate), nulls as empty cells."""
    header = (
        ["userId", "localDate"]
        + FEATURE_COLUMNS
        + [f"coverage_{t}" for t in MODALITY_TOPICS]
    )
    rows = sorted(vectors, key=lambda v: (v.user_id, v.date))
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for v in rows:
            w.writerow(
                [v.user_id, v.date.isoformat()]
                + [_cell(v.values.get(name)) for name in FEATURE_COLUMNS]
                + [_cell(v.coverage.get(t, 0)) for t in MODALITY_TOPICS]
            )


def write_provenance(cfg: FeatureConfig, path) -> None:
    Path(path).write_text(
        "feature pipeline constants\n" + cfg.provenance_text(), "utf-8"
    )


def local_dates_between(t0: float, t1: float, tz_offset_min: int) -> list[_dt.date]:
    d0 = local_date(t0, tz_offset_min)
    d1 = local_date(t1, tz_offset_min)
    out = []
    d = d0
    while d <= d1:
        out.append(d)
        d += _dt.timedelta(days=1)
    return out
