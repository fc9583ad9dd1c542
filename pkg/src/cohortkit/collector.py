"""OAuth2 vendor collector: authorization-code client, day polling, resumable backfill.

Token pairs rotate on refresh (an old refresh token replays as invalid_grant)
and persist per user under the data directory, as do per-(user, data type)
poll cursors. Appends deduplicate on (key, topic, time), so re-polling a day
or resuming an interrupted backfill never duplicates records.
"""

from __future__ import annotations

import datetime as _dt
import json
import os
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from urllib.parse import urlencode

import requests

from .errors import (
    InvalidRange,
    OAuthError,
    PermanentAuthFailure,
    StateRequired,
    VendorUnreachable,
)
from .model import ObservationKey, SensorRecord
from .registry import StudyRegistry
from .streamlog import LogStore

DATA_TYPE_TOPICS = {
    "sleep_stage": "vendor_sleep_stage",
    "intraday_steps": "vendor_intraday_steps",
    "resting_hr": "vendor_resting_heart_rate",
}

MAX_RATE_LIMIT_RETRIES = 5


@dataclass(frozen=True)
class VendorClientConfig:
    client_id: str
    client_secret: str
    authorize_url: str
    token_url: str
    api_base: str
    scopes: tuple[str, ...] = ("sleep", "activity", "heartrate")

    def __post_init__(self):
        for name in ("authorize_url", "token_url", "api_base"):
            value = getattr(self, name)
            if not value.startswith(("http://", "https://")):
                raise OAuthError("invalid_config", f"{name} must be an absolute URL")


@dataclass
class TokenPair:
    access_token: str
    refresh_token: str
    expires_at: float
    user_id: str


def authorization_url(
    config: VendorClientConfig,
    state: str,
    vendor_user: str | None = None,
    redirect_uri: str | None = None,
) -> str:
    """Authorization-code URL; the state parameter is the CSRF guard and is required."""
    if not state:
        raise StateRequired("state must be non-empty")
    params = {
        "response_type": "code",
        "client_id": config.client_id,
        "scope": " ".join(config.scopes),
        "state": state,
    }
    if vendor_user is not None:
        params["user"] = vendor_user
    if redirect_uri is not None:
        params["redirect_uri"] = redirect_uri
    return config.authorize_url + "?" + urlencode(params)


def _token_request(config: VendorClientConfig, form: dict, clock) -> TokenPair:
    form = dict(form, client_id=config.client_id, client_secret=config.client_secret)
    try:
        response = requests.post(config.token_url, data=form, timeout=30)
    except requests.RequestException as e:
        raise VendorUnreachable(str(e))
    if response.status_code != 200:
        try:
            code = response.json().get("error", "oauth_error")
        except ValueError:
            code = "oauth_error"
        raise OAuthError(code, f"token endpoint returned {response.status_code}")
    body = response.json()
    return TokenPair(
        access_token=body["access_token"],
        refresh_token=body["refresh_token"],
        expires_at=clock() + float(body.get("expires_in", 3600)),
        user_id=body["user_id"],
    )


def exchange_code(config: VendorClientConfig, code: str, clock=None) -> TokenPair:
    return _token_request(config, {"grant_type": "authorization_code", "code": code}, clock or time.time)


def refresh(config: VendorClientConfig, refresh_token: str, clock=None) -> TokenPair:
    return _token_request(
        config, {"grant_type": "refresh_token", "refresh_token": refresh_token}, clock or time.time
    )


@dataclass
class BackfillSummary:
    polled: int = 0
    appended: int = 0
    skipped_dates: int = 0
    failures: list = field(default_factory=list)  # (data_type, date_iso, error)

    def as_json(self) -> dict:
        return {
            "polled": self.polled,
            "appended": self.appended,
            "skippedDates": self.skipped_dates,
            "failures": [[d, day, err] for d, day, err in self.failures],
        }


class VendorCollector:
    """One collector per deployment; pollers per participant are independent."""

    def __init__(
        self,
        config: VendorClientConfig,
        store: LogStore,
        registry: StudyRegistry,
        data_dir,
        clock=None,
    ):
        self.config = config
        self.store = store
        self.registry = registry
        self.clock = clock or time.time
        self.root = Path(data_dir) / "collector"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()
        self._tokens: dict[str, TokenPair] = {}
        self._cursors: dict[str, dict[str, str]] = {}  # user -> data_type -> last date
        self._auth_failed: set[str] = set()
        self._seen: dict[str, set] = {}  # topic -> dedup keys already in the log
        self._load_state()

    # -- persisted state -------------------------------------------------------

    def _load_state(self):
        tokens_path = self.root / "tokens.json"
        if tokens_path.exists():
            raw = json.loads(tokens_path.read_text("utf-8"))
            for user, entry in raw.items():
                self._tokens[user] = TokenPair(
                    entry["accessToken"], entry["refreshToken"], entry["expiresAt"], user
                )
        cursors_path = self.root / "cursors.json"
        if cursors_path.exists():
            self._cursors = json.loads(cursors_path.read_text("utf-8"))
        flags = self.root / "auth_failures.json"
        if flags.exists():
            self._auth_failed = set(json.loads(flags.read_text("utf-8")))

    def _save_tokens(self):
        data = {
            user: {
                "accessToken": p.access_token,
                "refreshToken": p.refresh_token,
                "expiresAt": p.expires_at,
            }
            for user, p in sorted(self._tokens.items())
        }
        tmp = self.root / "tokens.tmp"
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True), "utf-8")
        os.replace(tmp, self.root / "tokens.json")

    def _save_cursors(self):
        tmp = self.root / "cursors.tmp"
        tmp.write_text(json.dumps(self._cursors, indent=1, sort_keys=True), "utf-8")
        os.replace(tmp, self.root / "cursors.json")

    def _save_auth_failures(self):
        tmp = self.root / "authf.tmp"
        tmp.write_text(json.dumps(sorted(self._auth_failed)), "utf-8")
        os.replace(tmp, self.root / "auth_failures.json")

    # -- authorization -----------------------------------------------------------

    def store_pair(self, pair: TokenPair):
        with self._lock:
            self._tokens[pair.user_id] = pair
            self._auth_failed.discard(pair.user_id)
            self._save_tokens()
            self._save_auth_failures()

    def authorize_user(self, user_id: str, state: str) -> TokenPair:
        """Run the full code flow against the (auto-approving) vendor."""
        url = authorization_url(
            self.config, state, vendor_user=user_id, redirect_uri="http://localhost/cb"
        )
        try:
            response = requests.get(url, allow_redirects=False, timeout=30)
        except requests.RequestException as e:
            raise VendorUnreachable(str(e))
        if response.status_code != 302:
            raise OAuthError("authorize_failed", f"status {response.status_code}")
        location = response.headers.get("Location", "")
        query = dict(
            part.split("=", 1) for part in location.split("?", 1)[1].split("&") if "=" in part
        )
        if query.get("state") != state:
            raise OAuthError("state_mismatch", "authorize response lost the state")
        pair = exchange_code(self.config, query["code"], self.clock)
        if pair.user_id != user_id:
            raise OAuthError("user_mismatch", "vendor returned another user's tokens")
        self.store_pair(pair)
        return pair

    def _fresh_token(self, user_id: str) -> TokenPair:
        with self._lock:
            if user_id in self._auth_failed:
                raise PermanentAuthFailure(f"{user_id}: vendor authorization revoked")
            pair = self._tokens.get(user_id)
        if pair is None:
            raise PermanentAuthFailure(f"{user_id}: never authorized")
        if self.clock() >= pair.expires_at:
            pair = self._refresh_or_flag(user_id, pair)
        return pair

    def _refresh_or_flag(self, user_id: str, pair: TokenPair) -> TokenPair:
        try:
            new_pair = refresh(self.config, pair.refresh_token, self.clock)
        except OAuthError:
            with self._lock:
                self._auth_failed.add(user_id)
                self._save_auth_failures()
            raise PermanentAuthFailure(f"{user_id}: refresh rejected by vendor")
        self.store_pair(new_pair)
        return new_pair

    # -- polling --------------------------------------------------------------

    def _get_day(self, user_id: str, data_type: str, date_iso: str) -> dict:
        pair = self._fresh_token(user_id)
        url = f"{self.config.api_base}/data/{user_id}/{data_type}/{date_iso}"
        refreshed = False
        rate_retries = 0
        while True:
            try:
                response = requests.get(
                    url, headers={"Authorization": f"Bearer {pair.access_token}"}, timeout=30
                )
            except requests.RequestException as e:
                raise VendorUnreachable(str(e))
            if response.status_code == 200:
                return response.json()
            if response.status_code == 401 and not refreshed:
                pair = self._refresh_or_flag(user_id, pair)
                refreshed = True
                continue
            if response.status_code == 401:
                with self._lock:
                    self._auth_failed.add(user_id)
                    self._save_auth_failures()
                raise PermanentAuthFailure(f"{user_id}: vendor rejected refreshed token")
            if response.status_code == 429 and rate_retries < MAX_RATE_LIMIT_RETRIES:
                delay = float(response.headers.get("Retry-After", "1"))
                time.sleep(delay)
                rate_retries += 1
                continue
            raise VendorUnreachable(f"vendor returned {response.status_code}")

    def _map_records(self, user_id: str, data_type: str, payload: dict) -> list[SensorRecord]:
        source = self.registry.vendor_source(user_id)
        if source is None:
            raise PermanentAuthFailure(f"{user_id}: no vendor source registered")
        participant = self.registry.get_participant(user_id)
        key = ObservationKey(participant.project_id, user_id, source.source_id)
        now = self.clock()
        topic = DATA_TYPE_TOPICS[data_type]
        records = []
        if data_type == "sleep_stage":
            for bout in payload.get("stages", []):
                records.append(
                    SensorRecord(
                        key,
                        topic,
                        1,
                        float(bout["startEpoch"]),
                        now,
                        {"stage": bout["stage"], "durationSeconds": int(bout["durationSeconds"])},
                    )
                )
        elif data_type == "intraday_steps":
            for quarter in payload.get("quarters", []):
                records.append(
                    SensorRecord(
                        key,
                        topic,
                        1,
                        float(quarter["startEpoch"]),
                        now,
                        {"steps": int(quarter["steps"])},
                    )
                )
        elif data_type == "resting_hr":
            if "bpm" in payload:
                records.append(
                    SensorRecord(
                        key, topic, 1, float(payload["epoch"]), now, {"bpm": float(payload["bpm"])}
                    )
                )
        return records

    def _seen_keys(self, topic: str) -> set:
        with self._lock:
            seen = self._seen.get(topic)
            if seen is None:
                seen = {record.dedup_key() for _, record in self.store.read_all(topic)}
                self._seen[topic] = seen
            return seen

    def poll(self, user_id: str, data_type: str, date: _dt.date) -> tuple[int, int]:
        """Fetch one vendor day; returns (records mapped, new records appended)."""
        if data_type not in DATA_TYPE_TOPICS:
            raise InvalidRange(f"unknown data type {data_type!r}")
        payload = self._get_day(user_id, data_type, date.isoformat())
        records = self._map_records(user_id, data_type, payload)
        topic = DATA_TYPE_TOPICS[data_type]
        seen = self._seen_keys(topic)
        fresh = []
        with self._lock:
            for record in records:
                dk = record.dedup_key()
                if dk not in seen:
                    seen.add(dk)
                    fresh.append(record)
        if fresh:
            self.store.append(topic, fresh)
        return len(records), len(fresh)

    def run_backfill(self, user_id: str, from_date: _dt.date, to_date: _dt.date) -> BackfillSummary:
        """Poll every (data type, date) not yet completed; cursors advance on success."""
        if from_date > to_date:
            raise InvalidRange(f"{from_date} > {to_date}")
        summary = BackfillSummary()
        cursors = self._cursors.setdefault(user_id, {})
        for data_type in DATA_TYPE_TOPICS:
            last = cursors.get(data_type)
            date = from_date
            while date <= to_date:
                if last is not None and date.isoformat() <= last:
                    summary.skipped_dates += 1
                    date += _dt.timedelta(days=1)
                    continue
                try:
                    _, appended = self.poll(user_id, data_type, date)
                except Exception as e:  # noqa: BLE001 - per-date failures are aggregated
                    summary.failures.append((data_type, date.isoformat(), str(e)))
                    break
                summary.polled += 1
                summary.appended += appended
                cursors[data_type] = date.isoformat()
                with self._lock:
                    self._save_cursors()
                date += _dt.timedelta(days=1)
        return summary
