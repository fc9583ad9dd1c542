"""Sleep period detection, nightly features, and weekly variability."""

from __future__ import annotations

import datetime as _dt
import math
import random

import pytest

from cohortkit.features import (
    FeatureConfig,
    StageBout,
    detect_sleep_period,
    sleep_features,
    sleep_variability,
)

import oracles

WS = 1_700_000_000.0 - (1_700_000_000.0 % 86400.0)  # a UTC midnight
H = 3600.0


def bout(stage, start_h, dur_min):
    return StageBout(stage, WS + start_h * H, dur_min * 60.0)


def test_contiguous_night_is_one_period():
    bouts = [bout("light", -1.0, 240), bout("deep", 3.0, 240)]  # 23:00 .. 07:00
    period = detect_sleep_period(bouts, WS)
    assert period is not None
    assert period.onset == WS - 1.0 * H
    assert period.offset == WS + 7.0 * H


def test_longest_candidate_wins():
    nap = [bout("light", -5.0, 120)]  # 19:00, 2 h
    night = [bout("light", 0.0, 210), bout("rem", 3.5, 210)]  # 7 h from midnight
    period = detect_sleep_period(nap + night, WS)
    assert period.onset == WS
    assert period.total_sleep_min() == 420.0


def test_short_nap_returns_none():
    assert detect_sleep_period([bout("light", 2.0, 40)], WS) is None


def test_start_window_bounds():
    too_early = [bout("light", -7.0, 400)]  # starts 17:00 previous day
    assert detect_sleep_period(too_early, WS) is None
    afternoon = [bout("light", 13.0, 400)]  # starts 13:00 of the window day
    assert detect_sleep_period(afternoon, WS) is None
    edge = [bout("light", -6.0, 400)]  # exactly 18:00 previous day
    assert detect_sleep_period(edge, WS) is not None


def test_gap_splits_periods():
    first = [bout("light", -2.0, 200)]
    second = [bout("light", 2.0, 200)]  # ends 01:20, next starts 02:00: 40 min gap merges
    period = detect_sleep_period(first + second, WS)
    assert period.total_sleep_min() == 400.0
    far = [bout("light", 6.0, 200)]  # 4 h 40 min gap: separate candidate
    period = detect_sleep_period(first + far, WS)
    assert period.total_sleep_min() == 200.0


def test_all_wake_group_skipped():
    assert detect_sleep_period([bout("wake", 0.0, 400)], WS) is None


def test_features_no_wake():
    period = detect_sleep_period([bout("light", 0.0, 480)], WS)
    f = sleep_features(period, WS)
    assert f["sleep_tst_min"] == 480.0
    assert f["sleep_sol_min"] == 0.0
    assert f["sleep_efficiency"] == 1.0
    assert f["sleep_fragmentation_index"] == 0.0


def test_sol_and_efficiency():
    period = detect_sleep_period([bout("wake", 0.0, 20), bout("light", 20 / 60.0, 400)], WS)
    f = sleep_features(period, WS)
    assert f["sleep_sol_min"] == 20.0
    assert f["sleep_efficiency"] == pytest.approx(400.0 / 420.0, rel=1e-12)


def test_midpoint_minutes_after_midnight():
    period = detect_sleep_period([bout("light", -1.0, 480)], WS)  # 23:00 -> 07:00
    f = sleep_features(period, WS)
    assert f["sleep_midpoint_min"] == 180.0


def test_fragmentation_counts_interior_wake_transitions():
    bouts = [
        bout("light", 0.0, 120),
        bout("wake", 2.0, 10),
        bout("deep", 2.0 + 10 / 60.0, 120),
        bout("wake", 4.0 + 10 / 60.0, 10),  # trailing: after last non-wake, not counted
    ]
    period = detect_sleep_period(bouts, WS)
    f = sleep_features(period, WS)
    assert f["sleep_tst_min"] == 240.0
    assert f["sleep_fragmentation_index"] == pytest.approx(1 / 4.0)


def _days(midpoints, sols=None, start=_dt.date(2024, 1, 1)):
    sols = sols or [0.0] * len(midpoints)
    return [
        (start + _dt.timedelta(days=i), m, s)
        for i, (m, s) in enumerate(zip(midpoints, sols))
    ]


def test_variability_identical_midpoints():
    out = sleep_variability(_days([180.0] * 7))
    assert out["sleep_midpoint_variance"] == 0.0
    assert out["sleep_sol_variance"] == 0.0
    assert out["social_jetlag_min"] == 0.0


def test_social_jetlag_120():
    # 2024-01-01 is a Monday; Sat/Sun are indexes 5, 6 and 12, 13
    days = _days([180.0] * 5 + [300.0, 300.0] + [180.0] * 5 + [300.0, 300.0])
    out = sleep_variability(days)
    assert out["social_jetlag_min"] == pytest.approx(120.0, abs=1e-12)


def test_six_days_all_none():
    out = sleep_variability(_days([180.0] * 6))
    assert out == {
        "sleep_midpoint_variance": None,
        "sleep_sol_variance": None,
        "social_jetlag_min": None,
    }


def test_midpoint_circular_fold():
    # 23:30 (1410) and 00:30 (30) fold to -210 and -150 around the 03:00 reference,
    # so the variance is 60-minutes-apart small, not straddling-midnight huge
    days = _days([1410.0, 30.0] * 4)
    out = sleep_variability(days)
    assert out["sleep_midpoint_variance"] == pytest.approx(8 * 900.0 / 7, rel=1e-12)


def test_jetlag_needs_two_of_each():
    days = _days([180.0] * 7, start=_dt.date(2024, 1, 2))  # Tue..Mon includes Sat+Sun
    assert sleep_variability(days)["social_jetlag_min"] is not None
    weekday_dates = [_dt.date(2024, 1, d) for d in (1, 2, 3, 4, 5, 8, 9)]  # Mon..Fri, Mon, Tue
    days = [(d, 180.0, 0.0) for d in weekday_dates]
    assert sleep_variability(days)["social_jetlag_min"] is None


@pytest.mark.parametrize("seed", range(30))
def test_sleep_oracle_agreement(seed):
    rng = random.Random(seed)
    bouts = []
    t = WS - rng.uniform(0, 8) * H
    for _ in range(rng.randint(1, 18)):
        stage = rng.choice(["wake", "light", "deep", "rem", "light", "light"])
        dur = rng.uniform(4, 140) * 60.0
        bouts.append(StageBout(stage, t, dur))
        t += dur + (rng.uniform(0, 150) * 60.0 if rng.random() < 0.25 else 0.0)
    got = detect_sleep_period(bouts, WS)
    expected = oracles.oracle_sleep_period([(b.stage, b.start, b.duration_s) for b in bouts], WS)
    if expected is None:
        assert got is None
        return
    group, onset, offset = expected
    assert got is not None
    assert got.onset == onset and got.offset == offset
    mine = sleep_features(got, WS)
    ref = oracles.oracle_sleep_features(group, onset, offset, WS)
    for k, v in ref.items():
        assert mine[k] == pytest.approx(v, rel=1e-12), k


@pytest.mark.parametrize("seed", range(15))
def test_variability_oracle_agreement(seed):
    rng = random.Random(100 + seed)
    n = rng.randint(5, 16)
    days = _days(
        [rng.uniform(0, 1440) for _ in range(n)],
        [rng.uniform(0, 60) for _ in range(n)],
        start=_dt.date(2024, 1, 1) + _dt.timedelta(days=rng.randint(0, 6)),
    )
    mine = sleep_variability(days)
    ref = oracles.oracle_sleep_variability(days)
    for k in ref:
        if ref[k] is None:
            assert mine[k] is None
        else:
            assert mine[k] == pytest.approx(ref[k], rel=1e-9)
