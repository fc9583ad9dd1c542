"""Phone interaction features: unlock sessions and step-count epochs."""

from __future__ import annotations

from .config import FeatureConfig
from .stats import median


def phone_use_features(
    events: list[tuple[float, str]],
    window_end_epoch: float,
) -> dict:
    """Session stats from time-sorted (epoch, UNLOCK|LOCK) events inside one window.

    An UNLOCK opens a session closed by the next LOCK; an UNLOCK still open at
    the window end is truncated there. LOCKs with no open session and repeated
    UNLOCKs are ignored. Inter-unlock gaps use every UNLOCK event.
    """
    out = {
        "unlock_count": None,
        "unlock_dur_min_min": None,
        "unlock_dur_max_min": None,
        "unlock_dur_median_min": None,
        "inter_unlock_median_min": None,
    }
    if not events:
        return out
    durations = []
    unlock_times = []
    open_at = None
    for t, kind in events:
        if kind == "UNLOCK":
            unlock_times.append(t)
            if open_at is None:
                open_at = t
        elif kind == "LOCK" and open_at is not None:
            durations.append((t - open_at) / 60.0)
            open_at = None
    if open_at is not None:
        durations.append((window_end_epoch - open_at) / 60.0)
    out["unlock_count"] = len(durations)
    if durations:
        out["unlock_dur_min_min"] = min(durations)
        out["unlock_dur_max_min"] = max(durations)
        out["unlock_dur_median_min"] = median(durations)
    if len(unlock_times) >= 2:
        gaps = [
            (b - a) / 60.0 for a, b in zip(unlock_times, unlock_times[1:])
        ]
        out["inter_unlock_median_min"] = median(gaps)
    return out


def step_features(
    epochs: list[tuple[float, int]],
    cfg: FeatureConfig = FeatureConfig(),
) -> dict:
    """Step stats over time-sorted (epoch start, steps) minute epochs.

    Empty input yields zeros, not nulls: a reporting stream with no steps is
    informative. A non-stop run is consecutive epochs (no missing minute) each
    at or above the non-stop cadence.
    """
    total = sum(steps for _, steps in epochs)
    runs: list[tuple[int, int]] = []  # (epoch count, step sum)
    run_len = 0
    run_steps = 0
    prev_t = None
    for t, steps in epochs:
        contiguous = prev_t is not None and t == prev_t + cfg.step_epoch_seconds
        if steps >= cfg.nonstop_min_steps:
            if run_len and contiguous:
                run_len += 1
                run_steps += steps
            else:
                if run_len:
                    runs.append((run_len, run_steps))
                run_len, run_steps = 1, steps
        else:
            if run_len:
                runs.append((run_len, run_steps))
            run_len, run_steps = 0, 0
        prev_t = t
    if run_len:
        runs.append((run_len, run_steps))
    moderate = sum(
        1 for _, steps in epochs if cfg.moderate_band_low <= steps <= cfg.moderate_band_high
    )
    return {
        "daily_step_sum": total,
        "max_nonstop_duration_min": max((n for n, _ in runs), default=0)
        * cfg.step_epoch_seconds
        // 60,
        "max_nonstop_steps": max((s for _, s in runs), default=0),
        "moderate_walking_min": moderate,
    }
