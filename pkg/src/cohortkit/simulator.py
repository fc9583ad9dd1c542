"""Deterministic synthetic participants: multi-modal streams plus vendor fixtures.

Generation is a pure function of (profile, start date, days, events). Each
(modality, day) gets its own PRNG derived from the participant seed through a
hash split, so editing one stream (for example injecting a seizure) never
perturbs the others. The behavioral template is sleep, commute, work,
commute, home, with stochastic jitter; weekends stay home, which gives the
mobility and social-jet-lag features realistic structure.

Scenario events: a focal seizure with a motor component (accelerometer
shaking, a sustained electrodermal rise outlasting the event, doubled IBI
variability) and a depressive episode (linear ramp to reduced mobility and
steps, noisier sleep timing, fewer nearby Bluetooth devices, more unlocks).
"""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import recordio
from .errors import SchemaError
from .model import ObservationKey, SchemaRegistry, SensorRecord, install_catalog
from .questionnaire import (
    QuestionnaireDef,
    StudyProtocol,
    compute_schedule,
    parse_protocol,
    parse_questionnaire,
    score_answers,
)
from .timeutil import DAY_SECONDS, local_midnight_epoch, parse_date

UPLINK_DELAY_S = 1.0  # stamped timeReceived for directly-appended records

SEIZURE_DURATION_RANGE_S = (30.0, 300.0)
EPISODE_MIN_DAYS = 7
EVENT_GUARD_MIN = 15.0  # streams are regenerated only within event +/- this margin


@dataclass
class ParticipantProfile:
    user_id: str
    project_id: str
    seed: int
    phone_source: str
    wearable_source: str
    vendor_source: str
    timezone_offset_minutes: int = 0
    home_lat: float = 51.5035
    home_lon: float = -0.0865
    work_lat: float = 51.5240
    work_lon: float = -0.0560
    sleep_onset_mean_min: float = 23.25 * 60  # minutes after local midnight (previous day)
    sleep_onset_sd_min: float = 25.0
    sleep_duration_mean_min: float = 450.0
    sleep_duration_sd_min: float = 30.0
    daily_steps_mean: float = 9000.0
    daily_steps_sd: float = 450.0
    nbdc_home_mean: float = 3.0
    nbdc_work_mean: float = 14.0
    unlock_rate_per_hour: float = 2.5
    hr_resting_mean_bpm: float = 62.0
    eda_baseline_us: float = 0.30
    questionnaire_compliance: float = 0.85

    def validate(self):
        for name in (
            "sleep_onset_sd_min",
            "sleep_duration_sd_min",
            "daily_steps_sd",
        ):
            if getattr(self, name) < 0:
                raise SchemaError(f"{name} must be >= 0")
        if not 30 <= self.hr_resting_mean_bpm <= 110:
            raise SchemaError("hr_resting_mean_bpm outside plausible range")
        if self.eda_baseline_us <= 0:
            raise SchemaError("eda_baseline_us must be positive")


@dataclass(frozen=True)
class ScenarioEvent:
    kind: str  # seizure | depressiveEpisode
    user_id: str
    start_epoch: float
    duration_s: float

    def __post_init__(self):
        if self.kind == "seizure":
            lo, hi = SEIZURE_DURATION_RANGE_S
            if not lo <= self.duration_s <= hi:
                raise SchemaError(f"seizure duration must be in [{lo}, {hi}] s")
        elif self.kind == "depressiveEpisode":
            if self.duration_s < EPISODE_MIN_DAYS * DAY_SECONDS:
                raise SchemaError("depressive episode must last at least 7 days")
        else:
            raise SchemaError(f"unknown event kind {self.kind!r}")

    @property
    def end_epoch(self) -> float:
        return self.start_epoch + self.duration_s


@dataclass
class Scenario:
    seed: int
    project_id: str
    start_date: _dt.date
    days: int
    participants: list[ParticipantProfile]
    events: list[ScenarioEvent] = field(default_factory=list)
    protocol: StudyProtocol | None = None
    questionnaires: dict[str, QuestionnaireDef] = field(default_factory=dict)


@dataclass
class SimulationResult:
    streams: dict  # user_id -> topic -> list[SensorRecord]
    fixtures: dict  # user_id -> data_type -> date_iso -> dict

    def all_records(self, user_id: str, topic: str) -> list[SensorRecord]:
        return self.streams.get(user_id, {}).get(topic, [])


def rng_for(seed: int, user_id: str, modality: str, day: int | str) -> np.random.Generator:
    """Split PRNG: one independent stream per (participant, modality, day)."""
    digest = hashlib.sha256(f"{seed}|{user_id}|{modality}|{day}".encode()).digest()
    return np.random.Generator(np.random.PCG64(int.from_bytes(digest[:8], "big")))


def episode_factor(events: list[ScenarioEvent], user_id: str, day_start: float) -> float:
    """Depressive-episode intensity for the day.

    Half effect on the episode's first day, full effect on interior days,
    half effect again on the first day after it ends (the ramp down), zero
    elsewhere. Days before the episode are untouched, so streams there match
    a baseline run seed-for-seed.
    """
    best = 0.0
    for ev in events:
        if ev.kind != "depressiveEpisode" or ev.user_id != user_id:
            continue
        if ev.start_epoch <= day_start < ev.end_epoch:
            f = min(1.0, 0.5 + (day_start - ev.start_epoch) / DAY_SECONDS)
        elif ev.end_epoch <= day_start < ev.end_epoch + DAY_SECONDS:
            f = 0.5
        else:
            f = 0.0
        best = max(best, f)
    return best


def apply_depressive_episode(profile: ParticipantProfile, factor: float) -> ParticipantProfile:
    """Per-day effective profile under an episode of the given intensity."""
    if factor <= 0.0:
        return profile
    return replace(
        profile,
        daily_steps_mean=profile.daily_steps_mean * (1.0 - 0.5 * factor),
        daily_steps_sd=profile.daily_steps_sd * (1.0 - 0.5 * factor),
        nbdc_home_mean=profile.nbdc_home_mean * (1.0 - 0.5 * factor),
        nbdc_work_mean=profile.nbdc_work_mean * (1.0 - 0.5 * factor),
        unlock_rate_per_hour=profile.unlock_rate_per_hour * (1.0 + 0.5 * factor),
        sleep_onset_sd_min=profile.sleep_onset_sd_min * (1.0 + factor),
    )


# ---------------------------------------------------------------------------
# per-day generation
# ---------------------------------------------------------------------------

_METERS_PER_DEG_LAT = 111_320.0


def _jitter_latlon(rng, lat, lon, sigma_m):
    dlat = rng.normal(0.0, sigma_m) / _METERS_PER_DEG_LAT
    dlon = rng.normal(0.0, sigma_m) / (_METERS_PER_DEG_LAT * math.cos(math.radians(lat)))
    return lat + dlat, lon + dlon


@dataclass
class _DayPlan:
    """Resolved timeline for one participant-day (all epochs)."""

    sleep_onset: float
    sleep_end: float
    works_today: bool
    leave_home: float
    arrive_work: float
    leave_work: float
    arrive_home: float
    outing_start: float
    outing_end: float
    next_onset: float


def _plan_day(profile, day_start, weekday, factor, rng) -> _DayPlan:
    onset = (
        day_start
        - DAY_SECONDS
        + rng.normal(profile.sleep_onset_mean_min, profile.sleep_onset_sd_min) * 60.0
    )
    duration = max(
        240.0, rng.normal(profile.sleep_duration_mean_min, profile.sleep_duration_sd_min)
    )
    sleep_end = onset + duration * 60.0
    works = weekday < 5 and rng.random() >= factor  # episode keeps the participant home
    wake = sleep_end
    leave = wake + rng.uniform(45, 90) * 60.0
    commute = rng.uniform(18, 25) * 60.0
    arrive_work = leave + commute
    leave_work = day_start + rng.uniform(17.0, 17.8) * 3600.0
    arrive_home = leave_work + commute
    # home days still include a short outing so mobility features stay defined
    outing_start = day_start + rng.uniform(13.5, 15.5) * 3600.0 if not works else 0.0
    outing_end = outing_start + rng.uniform(60, 110) * 60.0 if not works else 0.0
    next_onset = (
        day_start + rng.normal(profile.sleep_onset_mean_min, profile.sleep_onset_sd_min) * 60.0
    )
    return _DayPlan(
        onset,
        sleep_end,
        works,
        leave,
        arrive_work,
        leave_work,
        arrive_home,
        outing_start,
        outing_end,
        next_onset,
    )


def _where(plan: _DayPlan, t: float) -> str:
    if not plan.works_today:
        if plan.outing_start <= t < plan.outing_end:
            return "leisure"
        return "home"
    if plan.leave_home <= t < plan.arrive_work:
        return "commute_out"
    if plan.arrive_work <= t < plan.leave_work:
        return "work"
    if plan.leave_work <= t < plan.arrive_home:
        return "commute_back"
    return "home"


def _sleep_bouts(onset: float, sleep_end: float, rng) -> list[tuple[str, float, int]]:
    """Stage bouts fully covering [onset, end): ~90 min cycles with brief wakes.

    Roughly half the nights start with a short wake bout, so sleep onset
    latency varies instead of pinning at zero.
    """
    stages = []
    t = onset
    if rng.random() < 0.5:
        latency = rng.uniform(4, 18) * 60.0
        stages.append(("wake", t, int(latency)))
        t += latency
    cycle = ("light", "deep", "light", "rem")
    idx = 0
    while t < sleep_end - 60.0:
        stage = cycle[idx % len(cycle)]
        dur = min(rng.uniform(18, 32) * 60.0, sleep_end - t)
        stages.append((stage, t, int(dur)))
        t += dur
        idx += 1
        if idx % len(cycle) == 0 and t < sleep_end - 600.0 and rng.random() < 0.35:
            wake = min(rng.uniform(2, 7) * 60.0, sleep_end - t)
            stages.append(("wake", t, int(wake)))
            t += wake
    return [s for s in stages if s[2] > 0]


class _Generator:
    """Holds per-scenario context while emitting one participant's records."""

    def __init__(self, scenario: Scenario, profile: ParticipantProfile):
        self.scenario = scenario
        self.base_profile = profile
        self.tz = profile.timezone_offset_minutes
        self.key_phone = ObservationKey(profile.project_id, profile.user_id, profile.phone_source)
        self.key_wear = ObservationKey(
            profile.project_id, profile.user_id, profile.wearable_source
        )
        self.key_vendor = ObservationKey(
            profile.project_id, profile.user_id, profile.vendor_source
        )
        self.topics: dict[str, list[SensorRecord]] = {}
        self.fixtures: dict[str, dict[str, dict]] = {
            "sleep_stage": {},
            "intraday_steps": {},
            "resting_hr": {},
        }

    def emit(self, key, topic, t, payload):
        self.topics.setdefault(topic, []).append(
            SensorRecord(key, topic, 1, float(t), float(t) + UPLINK_DELAY_S, payload)
        )

    def rng(self, modality: str, day: int | str):
        return rng_for(self.base_profile.seed, self.base_profile.user_id, modality, day)

    # -- modalities --------------------------------------------------------

    def run(self):
        start_midnight = local_midnight_epoch(self.scenario.start_date, self.tz)
        plans = []
        for day in range(self.scenario.days):
            day_start = start_midnight + day * DAY_SECONDS
            date = self.scenario.start_date + _dt.timedelta(days=day)
            factor = episode_factor(self.scenario.events, self.base_profile.user_id, day_start)
            profile = apply_depressive_episode(self.base_profile, factor)
            plan = _plan_day(profile, day_start, date.weekday(), factor, self.rng("plan", day))
            plans.append(plan)
            self._sleep(profile, plan, day, date, day_start)
            self._location(profile, plan, day, day_start)
            self._nbdc(profile, plan, day, day_start)
            self._usage(profile, plan, day, day_start)
            self._steps(profile, plan, day, date, day_start)
            self._heart(profile, plan, day, day_start)
            self._eda(profile, day, day_start)
            self._light(plan, day, day_start)
            self._accel(day, day_start)
            self._temperature(day, day_start)
            self._bvp(profile, day, day_start)
        self._questionnaires(start_midnight)
        self._inject_seizures()
        for records in self.topics.values():
            records.sort(key=lambda r: (r.time, r.topic))
        return self.topics, self.fixtures

    def _sleep(self, profile, plan, day, date, day_start):
        rng = self.rng("sleep", day)
        bouts = _sleep_bouts(plan.sleep_onset, plan.sleep_end, rng)
        for stage, t, dur in bouts:
            self.emit(
                self.key_vendor,
                "vendor_sleep_stage",
                t,
                {"stage": stage, "durationSeconds": dur},
            )
        self.fixtures["sleep_stage"][date.isoformat()] = {
            "date": date.isoformat(),
            "stages": [
                {"stage": s, "startEpoch": t, "durationSeconds": d} for s, t, d in bouts
            ],
        }
        bpm = max(40.0, profile.hr_resting_mean_bpm + rng.normal(0.0, 1.0))
        self.fixtures["resting_hr"][date.isoformat()] = {
            "date": date.isoformat(),
            "epoch": day_start + 12 * 3600.0,
            "bpm": round(bpm, 1),
        }

    def _location(self, profile, plan, day, day_start):
        rng = self.rng("location", day)
        home = (profile.home_lat, profile.home_lon)
        work = (profile.work_lat, profile.work_lon)
        # nightstand samples keep the home cluster inferable overnight
        t = day_start
        while t < min(plan.sleep_end, day_start + DAY_SECONDS):
            lat, lon = _jitter_latlon(rng, *home, 4.0)
            self.emit(
                self.key_phone,
                "phone_relative_location",
                t,
                {"latitude": lat, "longitude": lon, "accuracy": 12.0},
            )
            t += 600.0
        leisure = (profile.home_lat + 0.0063, profile.home_lon + 0.0041)
        t = plan.sleep_end
        end = min(plan.next_onset, day_start + DAY_SECONDS)
        while t < end:
            place = _where(plan, t)
            if place == "home":
                lat, lon = _jitter_latlon(rng, *home, 8.0)
            elif place == "work":
                lat, lon = _jitter_latlon(rng, *work, 8.0)
            elif place == "leisure":
                lat, lon = _jitter_latlon(rng, *leisure, 8.0)
            else:
                if place == "commute_out":
                    frac = (t - plan.leave_home) / (plan.arrive_work - plan.leave_home)
                else:
                    frac = (t - plan.leave_work) / (plan.arrive_home - plan.leave_work)
                lat = home[0] + (work[0] - home[0]) * frac
                lon = home[1] + (work[1] - home[1]) * frac
                lat, lon = _jitter_latlon(rng, lat, lon, 5.0)
            self.emit(
                self.key_phone,
                "phone_relative_location",
                t,
                {"latitude": lat, "longitude": lon, "accuracy": 10.0},
            )
            t += 120.0

    def _nbdc(self, profile, plan, day, day_start):
        rng = self.rng("nbdc", day)
        for k in range(144):
            t = day_start + k * 600.0
            if t < plan.sleep_end or t >= plan.next_onset:
                mean = 1.0
            else:
                place = _where(plan, t)
                mean = profile.nbdc_work_mean if place == "work" else profile.nbdc_home_mean
                if place.startswith("commute") or place == "leisure":
                    mean = max(profile.nbdc_home_mean, 6.0)
            count = int(rng.poisson(mean))
            self.emit(self.key_phone, "phone_bluetooth_devices", t, {"count": count})

    def _usage(self, profile, plan, day, day_start):
        rng = self.rng("usage", day)
        t = plan.sleep_end + rng.uniform(60, 600)
        end = min(plan.next_onset, day_start + DAY_SECONDS)
        while t < end:
            dur = min(rng.lognormal(mean=0.4, sigma=0.8) * 60.0, 1800.0)
            self.emit(self.key_phone, "phone_usage_event", t, {"event": "UNLOCK"})
            lock_t = min(t + max(10.0, dur), end)
            self.emit(self.key_phone, "phone_usage_event", lock_t, {"event": "LOCK"})
            gap = rng.exponential(3600.0 / profile.unlock_rate_per_hour)
            t = lock_t + max(60.0, gap)

    def _steps(self, profile, plan, day, date, day_start):
        rng = self.rng("steps", day)
        target = max(0.0, rng.normal(profile.daily_steps_mean, profile.daily_steps_sd))
        epochs: dict[float, int] = {}

        def minute_of(t):
            return day_start + math.floor((t - day_start) / 60.0) * 60.0

        background = 0
        t = plan.sleep_end
        end = min(plan.next_onset, day_start + DAY_SECONDS)
        while t < end:
            steps = int(rng.integers(5, 50))
            epochs[minute_of(t)] = epochs.get(minute_of(t), 0) + steps
            background += steps
            t += rng.uniform(15, 25) * 60.0
        remaining = max(0.0, target - background)
        walk_slots = []
        if plan.works_today:
            walk_slots = [plan.leave_home, plan.leave_work]
        walk_slots.append(day_start + 18.5 * 3600.0)
        per_bout = remaining / len(walk_slots)
        for slot in walk_slots:
            cadence = float(rng.uniform(92, 114))
            minutes = int(round(per_bout / cadence))
            t0 = minute_of(slot)
            for m in range(minutes):
                epochs[t0 + m * 60.0] = int(cadence)
        for t0 in sorted(epochs):
            if epochs[t0] > 0:
                self.emit(
                    self.key_phone,
                    "phone_step_count",
                    t0,
                    {"steps": int(epochs[t0]), "epochSeconds": 60},
                )
        quarters = []
        for q in range(96):
            q0 = day_start + q * 900.0
            steps = sum(s for t0, s in epochs.items() if q0 <= t0 < q0 + 900.0)
            quarters.append({"startEpoch": q0, "steps": int(steps)})
        self.fixtures["intraday_steps"][date.isoformat()] = {
            "date": date.isoformat(),
            "quarters": quarters,
        }
        for q in quarters:
            self.emit(
                self.key_vendor, "vendor_intraday_steps", q["startEpoch"], {"steps": q["steps"]}
            )
        fx = self.fixtures["resting_hr"][date.isoformat()]
        self.emit(self.key_vendor, "vendor_resting_heart_rate", fx["epoch"], {"bpm": fx["bpm"]})

    def _heart(self, profile, plan, day, day_start):
        rng = self.rng("heart", day)
        for minute in range(1440):
            t = day_start + minute * 60.0
            asleep = t < plan.sleep_end or t >= plan.next_onset
            place = _where(plan, t)
            if asleep:
                base = profile.hr_resting_mean_bpm - 4.0
            elif place.startswith("commute"):
                base = profile.hr_resting_mean_bpm + 32.0
            else:
                base = profile.hr_resting_mean_bpm + 9.0
            self.emit(
                self.key_wear,
                "wearable_heart_rate",
                t,
                {"bpm": max(35.0, base + rng.normal(0.0, 2.0))},
            )
        for burst_start_h in (4.0, 15.0):
            t0 = day_start + burst_start_h * 3600.0
            hr = profile.hr_resting_mean_bpm + (0.0 if burst_start_h < 12 else 9.0)
            mean_ibi = 60000.0 / hr
            t = t0
            while t < t0 + 300.0:
                ibi = rng.normal(mean_ibi, 28.0)
                if rng.random() < 0.01:
                    ibi = 250.0  # occasional sensor artifact, filtered downstream
                self.emit(self.key_wear, "wearable_ibi", t, {"intervalMs": float(ibi)})
                t += max(0.3, ibi / 1000.0)

    def _eda(self, profile, day, day_start):
        rng = self.rng("eda", day)
        t0 = day_start + 14.0 * 3600.0
        level = profile.eda_baseline_us
        t = t0
        while t < t0 + 900.0:
            level += rng.normal(0.0, 0.002)
            level = min(max(level, profile.eda_baseline_us * 0.6), profile.eda_baseline_us * 1.6)
            value = level + rng.normal(0.0, 0.004)
            if rng.random() < 0.002:
                value += rng.uniform(0.1, 0.3)  # spontaneous skin-conductance response
            self.emit(self.key_wear, "wearable_eda", t, {"microsiemens": max(0.0, value)})
            t += 0.25

    def _light(self, plan, day, day_start):
        rng = self.rng("light", day)
        for k in range(288):
            t = day_start + k * 300.0
            asleep = t < plan.sleep_end or t >= plan.next_onset
            lux = rng.uniform(0, 4) if asleep else rng.uniform(80, 450)
            self.emit(self.key_phone, "phone_light", t, {"lux": float(lux)})

    def _accel(self, day, day_start):
        rng = self.rng("accel", day)
        t0 = day_start + 10.0 * 3600.0
        for s in range(600):
            t = t0 + s
            self.emit(
                self.key_phone,
                "phone_acceleration",
                t,
                {
                    "x": float(rng.normal(0.02, 0.05)),
                    "y": float(rng.normal(0.01, 0.05)),
                    "z": float(rng.normal(0.98, 0.05)),
                },
            )

    def _temperature(self, day, day_start):
        rng = self.rng("temperature", day)
        for h in range(24):
            self.emit(
                self.key_wear,
                "wearable_temperature",
                day_start + h * 3600.0,
                {"celsius": float(rng.normal(33.2, 0.4))},
            )

    def _bvp(self, profile, day, day_start):
        rng = self.rng("bvp", day)
        t0 = day_start + 15.0 * 3600.0
        hz = 4.0
        freq = profile.hr_resting_mean_bpm / 60.0
        for s in range(int(60 * hz)):
            t = t0 + s / hz
            value = math.sin(2.0 * math.pi * freq * (s / hz)) + rng.normal(0.0, 0.05)
            self.emit(self.key_wear, "wearable_bvp", t, {"value": float(value)})

    def _questionnaires(self, start_midnight):
        if self.scenario.protocol is None:
            return
        rng = self.rng("questionnaire", "all")
        horizon = self.scenario.days
        schedule = compute_schedule(self.scenario.protocol, start_midnight, self.tz, horizon)
        end = start_midnight + self.scenario.days * DAY_SECONDS
        for task in schedule:
            if task.open_at >= end:
                continue
            if rng.random() >= self.base_profile.questionnaire_compliance:
                continue
            submitted = task.open_at + rng.uniform(
                600.0, max(1200.0, (task.close_at - task.open_at) * 0.6)
            )
            qdef = self.scenario.questionnaires.get(task.questionnaire_name)
            answers = {}
            if qdef is not None:
                for item in qdef.items:
                    if item.input_type == "choice":
                        answers[item.id] = item.choices[int(rng.integers(0, len(item.choices)))]
                    elif item.input_type == "integer":
                        answers[item.id] = int(rng.integers(0, 10))
                    else:
                        answers[item.id] = "ok"
            payload = {
                "questionnaireName": task.questionnaire_name,
                "taskTime": task.open_at,
                "answersJson": json.dumps(answers, sort_keys=True),
            }
            if qdef is not None and qdef.scored:
                payload["score"] = score_answers(qdef, answers)
            self.emit(self.key_phone, "questionnaire_response", submitted, payload)

    # -- seizure injection ----------------------------------------------------

    def _inject_seizures(self):
        events = [
            ev
            for ev in self.scenario.events
            if ev.kind == "seizure" and ev.user_id == self.base_profile.user_id
        ]
        if not events:
            return
        events.sort(key=lambda e: e.start_epoch)
        for prev, cur in zip(events, events[1:]):
            if cur.start_epoch - prev.end_epoch < 2 * EVENT_GUARD_MIN * 60.0:
                raise SchemaError("overlapping seizure events")
        start_midnight = local_midnight_epoch(self.scenario.start_date, self.tz)
        sim_end = start_midnight + self.scenario.days * DAY_SECONDS
        for i, ev in enumerate(events):
            if ev.start_epoch < start_midnight or ev.end_epoch > sim_end:
                raise SchemaError("seizure event outside the simulated range")
            self._inject_one_seizure(ev, i)

    def _strip_window(self, topic, t0, t1):
        records = self.topics.get(topic, [])
        self.topics[topic] = [r for r in records if not t0 <= r.time < t1]

    def _inject_one_seizure(self, ev: ScenarioEvent, index: int):
        guard = EVENT_GUARD_MIN * 60.0
        region0, region1 = ev.start_epoch - guard, ev.end_epoch + guard
        rng = self.rng("seizure", f"{index}:{int(ev.start_epoch)}")
        base_eda = self.base_profile.eda_baseline_us
        for topic in ("wearable_eda", "phone_acceleration", "wearable_ibi"):
            self._strip_window(topic, region0, region1)
        # electrodermal activity, 4 Hz: sharp rise inside the event, sustained
        # elevation for at least a minute after it, then decay to baseline
        t = region0
        while t < region1:
            if t < ev.start_epoch:
                value = base_eda + rng.normal(0.0, 0.01)
            elif t < ev.end_epoch:
                ramp = min(1.0, (t - ev.start_epoch) / 10.0)
                value = base_eda * (1.0 + 2.8 * ramp) + rng.normal(0.0, 0.04)
            else:
                since = t - ev.end_epoch
                if since <= 60.0:
                    value = base_eda * 3.2 + rng.normal(0.0, 0.03)
                else:
                    decay = math.exp(-(since - 60.0) / 180.0)
                    value = base_eda * (1.0 + 2.2 * decay) + rng.normal(0.0, 0.02)
            self.emit(self.key_wear, "wearable_eda", t, {"microsiemens": max(0.0, value)})
            t += 0.25
        # accelerometer, 1 Hz: quiet baseline flanks, violent shaking inside
        t = region0
        while t < region1:
            if ev.start_epoch <= t < ev.end_epoch:
                x = rng.normal(0.0, 0.9)
                y = rng.normal(0.0, 0.9)
                z = rng.normal(0.98, 0.9)
            else:
                x = rng.normal(0.02, 0.05)
                y = rng.normal(0.01, 0.05)
                z = rng.normal(0.98, 0.05)
            self.emit(
                self.key_phone,
                "phone_acceleration",
                t,
                {"x": float(x), "y": float(y), "z": float(z)},
            )
            t += 1.0
        # inter-beat intervals: elevated rate and doubled variability inside
        mean_ibi = 60000.0 / self.base_profile.hr_resting_mean_bpm
        t = region0
        while t < region1:
            inside = ev.start_epoch <= t < ev.end_epoch
            ibi = rng.normal(mean_ibi * (0.8 if inside else 1.0), 70.0 if inside else 28.0)
            self.emit(self.key_wear, "wearable_ibi", t, {"intervalMs": float(ibi)})
            t += max(0.3, ibi / 1000.0)


# ---------------------------------------------------------------------------
# scenario files and outputs
# ---------------------------------------------------------------------------


def simulate(scenario: Scenario) -> SimulationResult:
    streams = {}
    fixtures = {}
    for profile in scenario.participants:
        profile.validate()
        topics, fx = _Generator(scenario, profile).run()
        streams[profile.user_id] = topics
        fixtures[profile.user_id] = fx
    return SimulationResult(streams=streams, fixtures=fixtures)


def load_scenario(document: str) -> Scenario:
    raw = json.loads(document)
    start_date = parse_date(raw["startDate"])
    participants = []
    for p in raw["participants"]:
        sources = p.get("sources", {})
        profile = ParticipantProfile(
            user_id=p["userId"],
            project_id=raw["projectId"],
            seed=int(p.get("seed", raw["seed"])),
            phone_source=sources.get("phone", f"{p['userId']}-phone-1"),
            wearable_source=sources.get("wearable", f"{p['userId']}-wearable-1"),
            vendor_source=sources.get("vendor", f"{p['userId']}-vendor-1"),
            timezone_offset_minutes=int(p.get("tzOffsetMinutes", 0)),
        )
        for name in (
            "home_lat",
            "home_lon",
            "work_lat",
            "work_lon",
            "sleep_onset_mean_min",
            "sleep_onset_sd_min",
            "sleep_duration_mean_min",
            "sleep_duration_sd_min",
            "daily_steps_mean",
            "daily_steps_sd",
            "nbdc_home_mean",
            "nbdc_work_mean",
            "unlock_rate_per_hour",
            "hr_resting_mean_bpm",
            "eda_baseline_us",
            "questionnaire_compliance",
        ):
            if name in p:
                setattr(profile, name, float(p[name]))
        participants.append(profile)
    tz_by_user = {p.user_id: p.timezone_offset_minutes for p in participants}
    events = []
    for ev in raw.get("events", []):
        if "startEpoch" in ev:
            start = float(ev["startEpoch"])
        else:
            day = int(ev["day"])
            hh, mm = (int(x) for x in ev.get("localTime", "12:00").split(":"))
            tz = tz_by_user.get(ev["userId"], 0)
            start = (
                local_midnight_epoch(start_date, tz)
                + day * DAY_SECONDS
                + hh * 3600.0
                + mm * 60.0
            )
        events.append(
            ScenarioEvent(
                kind=ev["kind"],
                user_id=ev["userId"],
                start_epoch=start,
                duration_s=float(ev["durationSeconds"]),
            )
        )
    protocol = None
    if raw.get("protocol") is not None:
        protocol = parse_protocol(json.dumps(raw["protocol"]))
    questionnaires = {}
    for q in raw.get("questionnaires", []):
        qdef = parse_questionnaire(json.dumps(q))
        questionnaires[qdef.name] = qdef
    return Scenario(
        seed=int(raw["seed"]),
        project_id=raw["projectId"],
        start_date=start_date,
        days=int(raw["days"]),
        participants=participants,
        events=events,
        protocol=protocol,
        questionnaires=questionnaires,
    )


def write_outputs(result: SimulationResult, out_dir) -> dict:
    """Write per-user per-topic stream files and mock-vendor fixtures.

    Returns a manifest (sorted keys) with record counts per file.
    """
    out = Path(out_dir)
    registry = SchemaRegistry()
    install_catalog(registry)
    manifest = {"streams": {}, "fixtures": {}}
    for user_id in sorted(result.streams):
        udir = out / "streams" / user_id
        udir.mkdir(parents=True, exist_ok=True)
        for topic in sorted(result.streams[user_id]):
            records = result.streams[user_id][topic]
            if not records:
                continue
            schema = registry.get(topic, 1)
            path = udir / f"{topic}.csv"
            path.write_text(recordio.serialize_records(records, schema), "utf-8")
            manifest["streams"][f"{user_id}/{topic}"] = len(records)
    for user_id in sorted(result.fixtures):
        for data_type in sorted(result.fixtures[user_id]):
            ddir = out / "fixtures" / user_id / data_type
            ddir.mkdir(parents=True, exist_ok=True)
            for date_iso in sorted(result.fixtures[user_id][data_type]):
                payload = result.fixtures[user_id][data_type][date_iso]
                (ddir / f"{date_iso}.json").write_text(
                    json.dumps(payload, sort_keys=True), "utf-8"
                )
                manifest["fixtures"][f"{user_id}/{data_type}/{date_iso}"] = 1
    (out / "manifest.json").write_text(json.dumps(manifest, indent=1, sort_keys=True), "utf-8")
    return manifest
