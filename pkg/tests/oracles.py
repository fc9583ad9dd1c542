"""Independent brute-force oracles for every feature operation.

Deliberately naive, loop-based, and self-contained: no code is shared with
the package implementations (separate haversine, median, variance, DFT).
These exist so the oracle suite compares two genuinely independent routes to
the same numbers.
"""

from __future__ import annotations

import cmath
import math

EARTH_R = 6_371_000.0


def hav(lat1, lon1, lat2, lon2):
    p1 = lat1 * math.pi / 180.0
    p2 = lat2 * math.pi / 180.0
    dp = (lat2 - lat1) * math.pi / 180.0
    dl = (lon2 - lon1) * math.pi / 180.0
    a = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_R * math.asin(min(1.0, math.sqrt(a)))


def naive_mean(xs):
    total = 0.0
    for x in xs:
        total += x
    return total / len(xs)


def naive_var(xs):
    if len(xs) < 2:
        return None
    m = naive_mean(xs)
    acc = 0.0
    for x in xs:
        acc += (x - m) * (x - m)
    return acc / (len(xs) - 1)


def naive_sd(xs):
    v = naive_var(xs)
    return None if v is None else math.sqrt(v)


def naive_median(xs):
    s = sorted(xs)
    n = len(s)
    if n % 2 == 1:
        return float(s[n // 2])
    return (s[n // 2 - 1] + s[n // 2]) / 2.0


def naive_entropy_from_weights(ws):
    total = 0.0
    for w in ws:
        total += w
    if total <= 0:
        return 0.0
    h = 0.0
    for w in ws:
        if w > 0:
            p = w / total
            h -= p * math.log(p)
    return h


# -- sleep -------------------------------------------------------------------


def oracle_sleep_period(bouts, window_start, gap_max_s=3600.0, min_total_s=10800.0):
    """bouts: (stage, start, duration_s). Returns (bout list, onset, offset) or None."""
    bouts = sorted(bouts, key=lambda b: b[1])
    groups = []
    for b in bouts:
        if groups:
            last = groups[-1][-1]
            if b[1] - (last[1] + last[2]) < gap_max_s:
                groups[-1].append(b)
                continue
        groups.append([b])
    best = None
    for g in groups:
        start = g[0][1]
        if not (window_start - 6 * 3600.0 <= start <= window_start + 12 * 3600.0):
            continue
        total = 0.0
        for b in g:
            total += b[2]
        if total < min_total_s:
            continue
        non_wake = [b for b in g if b[0] != "wake"]
        if not non_wake:
            continue
        if best is None or total > best[0] or (total == best[0] and start < best[1]):
            best = (total, start, g, non_wake)
    if best is None:
        return None
    g, non_wake = best[2], best[3]
    onset = non_wake[0][1]
    offset = non_wake[-1][1] + non_wake[-1][2]
    return g, onset, offset


def oracle_sleep_features(group, onset, offset, window_start):
    first = group[0][1]
    tst_min = 0.0
    for b in group:
        if b[0] != "wake":
            tst_min += b[2] / 60.0
    sol_min = (onset - first) / 60.0
    eff = tst_min / ((offset - first) / 60.0)
    midpoint = (((onset + offset) / 2.0 - window_start) / 60.0) % 1440.0
    transitions = 0
    for i in range(1, len(group)):
        if (
            group[i][0] == "wake"
            and group[i - 1][0] != "wake"
            and onset < group[i][1] < offset
        ):
            transitions += 1
    fi = transitions / (tst_min / 60.0)
    return {
        "sleep_tst_min": tst_min,
        "sleep_sol_min": sol_min,
        "sleep_efficiency": eff,
        "sleep_midpoint_min": midpoint,
        "sleep_fragmentation_index": fi,
    }


def oracle_sleep_variability(days, min_days=7, reference_min=180.0):
    out = {"sleep_midpoint_variance": None, "sleep_sol_variance": None, "social_jetlag_min": None}
    if len(days) < min_days:
        return out
    folded = []
    for _, m, _ in days:
        x = (m - reference_min) % 1440.0
        if x > 720.0:
            x -= 1440.0
        folded.append(x)
    out["sleep_midpoint_variance"] = naive_var(folded)
    out["sleep_sol_variance"] = naive_var([s for _, _, s in days])
    we = [x for (d, _, _), x in zip(days, folded) if d.weekday() >= 5]
    wd = [x for (d, _, _), x in zip(days, folded) if d.weekday() < 5]
    if len(we) >= 2 and len(wd) >= 2:
        out["social_jetlag_min"] = abs(naive_mean(we) - naive_mean(wd))
    return out


# -- location ------------------------------------------------------------------


def _oracle_speeds(points):
    speeds = [0.0]
    for i in range(1, len(points)):
        d = hav(points[i - 1][0], points[i - 1][1], points[i][0], points[i][1])
        dt = points[i][2] - points[i - 1][2]
        if dt > 0:
            speeds.append(d / dt)
        else:
            speeds.append(0.0 if d == 0.0 else math.inf)
    return speeds


def oracle_clusters(points, radius=300.0, gate=1.0, cap=600.0):
    """Returns (centers, dwell, assignment list with None for moving points)."""
    if len(points) < 2:
        return [], [], []
    speeds = _oracle_speeds(points)
    centers = []
    dwell = []
    assign = []
    for i, p in enumerate(points):
        if speeds[i] >= gate:
            assign.append(None)
            continue
        hit = None
        for c, (clat, clon) in enumerate(centers):
            if hav(p[0], p[1], clat, clon) <= radius:
                hit = c
                break
        if hit is None:
            centers.append((p[0], p[1]))
            dwell.append(0.0)
            hit = len(centers) - 1
        assign.append(hit)
    for i in range(1, len(points)):
        if assign[i] is not None:
            dt = points[i][2] - points[i - 1][2]
            dwell[assign[i]] += dt if dt < cap else cap
    return centers, dwell, assign


def oracle_home(points, centers, dwell, tz_offset_min, radius=300.0, gate=1.0, cap=600.0,
                night=(0.0, 6.0)):
    if not centers:
        return None
    speeds = _oracle_speeds(points)
    night_dwell = [0.0] * len(centers)
    for i in range(1, len(points)):
        if speeds[i] >= gate:
            continue
        hit = None
        for c, (clat, clon) in enumerate(centers):
            if hav(points[i][0], points[i][1], clat, clon) <= radius:
                hit = c
                break
        if hit is None:
            continue
        shifted = points[i][2] + tz_offset_min * 60.0
        hour = (shifted % 86400.0) / 3600.0
        if night[0] <= hour < night[1]:
            dt = points[i][2] - points[i - 1][2]
            night_dwell[hit] += dt if dt < cap else cap
    if max(night_dwell, default=0.0) <= 0.0:
        return None
    best = 0
    for c in range(1, len(centers)):
        if (night_dwell[c], dwell[c], -c) > (night_dwell[best], dwell[best], -best):
            best = c
    return best


def oracle_location_features(points, centers, dwell, home, gate=1.0, floor=1e-12):
    out = {
        "location_variance": None,
        "location_clusters": None,
        "location_entropy": None,
        "location_entropy_normalized": None,
        "homestay": None,
        "moving_time_min": None,
        "moving_distance_m": None,
    }
    if len(points) < 2:
        return out
    out["location_variance"] = math.log(
        naive_var([p[0] for p in points]) + naive_var([p[1] for p in points]) + floor
    )
    out["location_clusters"] = len(centers)
    total = 0.0
    for w in dwell:
        total += w
    if total > 0:
        out["location_entropy"] = naive_entropy_from_weights(dwell)
        if len(centers) >= 2:
            out["location_entropy_normalized"] = out["location_entropy"] / math.log(len(centers))
        if home is not None:
            out["homestay"] = dwell[home] / total
    speeds = _oracle_speeds(points)
    mt = 0.0
    md = 0.0
    for i in range(1, len(points)):
        if speeds[i] >= gate and speeds[i] != math.inf:
            mt += points[i][2] - points[i - 1][2]
            md += hav(points[i - 1][0], points[i - 1][1], points[i][0], points[i][1])
    out["moving_time_min"] = mt / 60.0
    out["moving_distance_m"] = md
    return out


# -- NBDC ------------------------------------------------------------------------


def oracle_nbdc(counts):
    out = {"nbdc_max": None, "nbdc_min": None, "nbdc_mean": None, "nbdc_sd": None, "nbdc_entropy": None}
    if not counts:
        return out
    out["nbdc_max"] = max(counts)
    out["nbdc_min"] = min(counts)
    out["nbdc_mean"] = naive_mean(counts)
    out["nbdc_sd"] = naive_sd(counts)
    freq = {}
    for c in counts:
        freq[c] = freq.get(c, 0) + 1
    out["nbdc_entropy"] = naive_entropy_from_weights(list(freq.values()))
    return out


_DFT_TABLES: dict[int, list[complex]] = {}


def _dft_table(n):
    table = _DFT_TABLES.get(n)
    if table is None:
        table = [cmath.exp(-2j * cmath.pi * m / n) for m in range(n)]
        _DFT_TABLES[n] = table
    return table


def oracle_nbdc_freq(scans, start, n_hours, max_gap=3, min_fraction=0.8):
    out = {"nbdc_power24h_fraction": None, "nbdc_dominant_period_h": None}
    sums = [0.0] * n_hours
    counts = [0] * n_hours
    for t, v in scans:
        k = int((t - start) // 3600.0)
        if 0 <= k < n_hours:
            sums[k] += v
            counts[k] += 1
    slots = [sums[k] / counts[k] if counts[k] else None for k in range(n_hours)]
    known = [k for k in range(n_hours) if slots[k] is not None]
    for a, b in zip(known, known[1:]):
        gap = b - a - 1
        if 0 < gap <= max_gap:
            step = (slots[b] - slots[a]) / (b - a)
            for j in range(a + 1, b):
                slots[j] = slots[a] + step * (j - a)
    present = [v for v in slots if v is not None]
    if len(present) < min_fraction * n_hours:
        return out
    m = naive_mean(present)
    x = [(v - m) if v is not None else 0.0 for v in slots]
    table = _dft_table(n_hours)
    half = n_hours // 2
    power = [0.0] * (half + 1)
    for k in range(1, half + 1):
        acc = 0.0 + 0.0j
        for i in range(n_hours):
            acc += x[i] * table[(k * i) % n_hours]
        power[k] = abs(acc) ** 2
    total = 0.0
    for k in range(1, half + 1):
        total += power[k]
    if total <= 0.0:
        return out
    best24 = 1
    for k in range(2, half + 1):
        if abs(n_hours / k - 24.0) < abs(n_hours / best24 - 24.0):
            best24 = k
    out["nbdc_power24h_fraction"] = power[best24] / total
    kmax = 1
    for k in range(2, half + 1):
        if power[k] > power[kmax]:
            kmax = k
    out["nbdc_dominant_period_h"] = n_hours / kmax
    return out


# -- phone use / steps --------------------------------------------------------------


def oracle_phone_use(events, window_end):
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
    unlocks = []
    open_t = None
    for t, kind in events:
        if kind == "UNLOCK":
            unlocks.append(t)
            if open_t is None:
                open_t = t
        elif kind == "LOCK" and open_t is not None:
            durations.append((t - open_t) / 60.0)
            open_t = None
    if open_t is not None:
        durations.append((window_end - open_t) / 60.0)
    out["unlock_count"] = len(durations)
    if durations:
        out["unlock_dur_min_min"] = min(durations)
        out["unlock_dur_max_min"] = max(durations)
        out["unlock_dur_median_min"] = naive_median(durations)
    if len(unlocks) >= 2:
        out["inter_unlock_median_min"] = naive_median(
            [(unlocks[i + 1] - unlocks[i]) / 60.0 for i in range(len(unlocks) - 1)]
        )
    return out


def oracle_steps(epochs, epoch_s=60, nonstop=60, band=(60, 115)):
    total = 0
    for _, s in epochs:
        total += s
    runs = []
    cur_len = 0
    cur_sum = 0
    prev = None
    for t, s in epochs:
        if s >= nonstop and (cur_len == 0 or (prev is not None and t == prev + epoch_s)):
            cur_len += 1
            cur_sum += s
        elif s >= nonstop:
            runs.append((cur_len, cur_sum))
            cur_len, cur_sum = 1, s
        else:
            if cur_len:
                runs.append((cur_len, cur_sum))
            cur_len, cur_sum = 0, 0
        prev = t
    if cur_len:
        runs.append((cur_len, cur_sum))
    moderate = 0
    for _, s in epochs:
        if band[0] <= s <= band[1]:
            moderate += 1
    return {
        "daily_step_sum": total,
        "max_nonstop_duration_min": max([r[0] for r in runs], default=0) * epoch_s // 60,
        "max_nonstop_steps": max([r[1] for r in runs], default=0),
        "moderate_walking_min": moderate,
    }


# -- cardiac / EDA -------------------------------------------------------------------


def oracle_heart(ibi, hr, lo=300.0, hi=2000.0, gap=5.0, min_count=10, pct=5.0, min_minutes=600):
    out = {"resting_hr_bpm": None, "rmssd_ms": None, "sdnn_ms": None}
    kept = [(t, v) for t, v in ibi if lo <= v <= hi]
    if len(kept) >= min_count:
        out["sdnn_ms"] = naive_sd([v for _, v in kept])
        sq = []
        for i in range(1, len(kept)):
            if kept[i][0] - kept[i - 1][0] < gap:
                d = kept[i][1] - kept[i - 1][1]
                sq.append(d * d)
        if sq:
            out["rmssd_ms"] = math.sqrt(naive_mean(sq))
    if hr:
        bins = {}
        for t, bpm in hr:
            bins.setdefault(int(t // 60.0), []).append(bpm)
        if len(bins) >= min_minutes:
            means = sorted(naive_mean(v) for v in bins.values())
            rank = max(1, math.ceil(pct / 100.0 * len(means)))
            out["resting_hr_bpm"] = means[rank - 1]
    return out


def oracle_eda(samples, rise=0.05, sep=1.0, window=60.0, min_cov=5):
    out = {"eda_mean_us": None, "eda_sd_us": None, "eda_peaks_per_min": None}
    minutes = set()
    for t, _ in samples:
        minutes.add(int(t // 60.0))
    if len(minutes) < min_cov:
        return out
    values = [v for _, v in samples]
    out["eda_mean_us"] = naive_mean(values)
    out["eda_sd_us"] = naive_sd(values)
    half = window / 2.0
    peaks = 0
    last = None
    for i in range(1, len(samples) - 1):
        t, v = samples[i]
        if not (v > samples[i - 1][1] and v > samples[i + 1][1]):
            continue
        neighborhood = [v2 for t2, v2 in samples if t - half <= t2 <= t + half]
        if v <= naive_median(neighborhood) + rise:
            continue
        if last is not None and t - last < sep:
            continue
        peaks += 1
        last = t
    out["eda_peaks_per_min"] = peaks / len(minutes)
    return out
