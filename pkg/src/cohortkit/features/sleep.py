"""Sleep-period detection from vendor stage bouts, nightly features, and weekly variability.

A window's sleep period is assembled by merging stage bouts separated by
less than an hour, keeping candidates that start between 18:00 of the
previous local day and noon of the window day, and returning the one with
the most total bout time (at least three hours, with at least one non-wake
bout so an onset exists).
"""

from __future__ import annotations

from dataclasses import dataclass

from .config import FeatureConfig
from .stats import mean, sample_variance


@dataclass(frozen=True)
class StageBout:
    stage: str
    start: float
    duration_s: float

    @property
    def end(self) -> float:
        return self.start + self.duration_s


@dataclass(frozen=True)
class SleepPeriod:
    bouts: tuple[StageBout, ...]
    onset: float   # start of the first non-wake bout
    offset: float  # end of the last non-wake bout

    @property
    def first_start(self) -> float:
        return self.bouts[0].start

    def total_sleep_min(self) -> float:
        return sum(b.duration_s for b in self.bouts if b.stage != "wake") / 60.0


def _group_bouts(bouts: list[StageBout], gap_max_s: float) -> list[list[StageBout]]:
    groups: list[list[StageBout]] = []
    for bout in bouts:
        if groups and bout.start - groups[-1][-1].end < gap_max_s:
            groups[-1].append(bout)
        else:
            groups.append([bout])
    return groups


def detect_sleep_period(
    bouts: list[StageBout], window_start_epoch: float, cfg: FeatureConfig = FeatureConfig()
) -> SleepPeriod | None:
    """Pick the window's main sleep period from time-sorted stage bouts, if any."""
    earliest = window_start_epoch + cfg.sleep_start_earliest_hour * 3600.0
    latest = window_start_epoch + cfg.sleep_start_latest_hour * 3600.0
    best: tuple[float, float, list[StageBout]] | None = None
    for group in _group_bouts(sorted(bouts, key=lambda b: b.start), cfg.sleep_gap_max_min * 60.0):
        start = group[0].start
        if not earliest <= start <= latest:
            continue
        total_s = sum(b.duration_s for b in group)
        if total_s < cfg.sleep_min_total_min * 60.0:
            continue
        if all(b.stage == "wake" for b in group):
            continue
        # longest total duration wins; earlier start breaks ties
        if best is None or total_s > best[0] or (total_s == best[0] and start < best[1]):
            best = (total_s, start, group)
    if best is None:
        return None
    group = best[2]
    non_wake = [b for b in group if b.stage != "wake"]
    return SleepPeriod(bouts=tuple(group), onset=non_wake[0].start, offset=non_wake[-1].end)


def sleep_features(period: SleepPeriod, window_start_epoch: float) -> dict:
    """Nightly summary of one sleep period, minutes unless stated otherwise."""
    tst_min = period.total_sleep_min()
    sol_min = (period.onset - period.first_start) / 60.0
    span_min = (period.offset - period.first_start) / 60.0
    efficiency = tst_min / span_min
    midpoint_epoch = (period.onset + period.offset) / 2.0
    midpoint_min = ((midpoint_epoch - window_start_epoch) / 60.0) % 1440.0
    transitions = 0
    for prev, cur in zip(period.bouts, period.bouts[1:]):
        if (
            cur.stage == "wake"
            and prev.stage != "wake"
            and period.onset < cur.start < period.offset
        ):
            transitions += 1
    fragmentation = transitions / (tst_min / 60.0)
    return {
        "sleep_tst_min": tst_min,
        "sleep_sol_min": sol_min,
        "sleep_efficiency": efficiency,
        "sleep_midpoint_min": midpoint_min,
        "sleep_fragmentation_index": fragmentation,
    }


def _fold_midpoint(midpoint_min: float, reference_min: float) -> float:
    """Map a clock midpoint onto (-720, 720] minutes around the reference time."""
    x = (midpoint_min - reference_min) % 1440.0
    return x - 1440.0 if x > 720.0 else x


def sleep_variability(
    days: list[tuple], cfg: FeatureConfig = FeatureConfig()
) -> dict:
    """Variance of midpoint/SOL and social jet lag over (date, midpoint_min, sol_min) days.

    Midpoints are compared on a circular scale folded around the configured
    reference clock time; weekend means Saturday or Sunday in local time.
    """
    out = {"sleep_midpoint_variance": None, "sleep_sol_variance": None, "social_jetlag_min": None}
    if len(days) < cfg.variability_min_days:
        return out
    folded = [_fold_midpoint(m, cfg.midpoint_reference_min) for _, m, _ in days]
    sols = [s for _, _, s in days]
    out["sleep_midpoint_variance"] = sample_variance(folded)
    out["sleep_sol_variance"] = sample_variance(sols)
    weekend = [x for (d, _, _), x in zip(days, folded) if d.weekday() >= 5]
    weekday = [x for (d, _, _), x in zip(days, folded) if d.weekday() < 5]
    if len(weekend) >= 2 and len(weekday) >= 2:
        out["social_jetlag_min"] = abs(mean(weekend) - mean(weekday))
    return out
