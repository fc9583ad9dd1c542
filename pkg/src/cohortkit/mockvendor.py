"""Bundled mock vendor: OAuth2 authorization-code + refresh rotation + day data API.

Serves simulator-generated fixtures from a directory laid out as
``<fixtureDir>/<vendorUser>/<dataType>/<YYYY-MM-DD>.json``. The authorize
endpoint auto-approves (the ``user`` query parameter names the vendor-side
account). A ``/_control`` endpoint arms failure and rate-limit behavior for
tests; the full wire contract lives in docs/mock-vendor-api.md.
"""

from __future__ import annotations

import json
import secrets
import threading
import time
from pathlib import Path
from urllib.parse import urlencode

from .httpkit import HttpError, Request, Route

DATA_TYPES = ("sleep_stage", "intraday_steps", "resting_hr")

_EMPTY = {
    "sleep_stage": {"stages": []},
    "intraday_steps": {"quarters": []},
    "resting_hr": {},
}


class MockVendor:
    def __init__(
        self,
        fixture_dir,
        client_id: str = "cohortkit-client",
        client_secret: str = "cohortkit-secret",
        access_ttl_seconds: float = 3600.0,
        clock=None,
    ):
        self.fixture_dir = Path(fixture_dir)
        self.client_id = client_id
        self.client_secret = client_secret
        self.access_ttl = access_ttl_seconds
        self.clock = clock or time.time
        self._lock = threading.Lock()
        self._codes: dict[str, dict] = {}
        self._access: dict[str, dict] = {}
        self._refresh: dict[str, dict] = {}
        self._fail_once: dict[str, int] = {}
        self._rate_every: int | None = None
        self._rate_retry_after = 1
        self._data_request_count = 0

    # -- OAuth endpoints -----------------------------------------------------

    def _authorize(self, request: Request):
        q = request.query
        if q.get("response_type") != "code":
            raise HttpError(400, "unsupported_response_type")
        if q.get("client_id") != self.client_id:
            raise HttpError(400, "invalid_client")
        state = q.get("state", "")
        if not state:
            raise HttpError(400, "invalid_request", "state is required")
        redirect = q.get("redirect_uri", "")
        user = q.get("user", "")
        if not user:
            raise HttpError(400, "invalid_request", "user is required (mock auto-approval)")
        code = "code_" + secrets.token_hex(12)
        with self._lock:
            self._codes[code] = {"user": user, "expires": self.clock() + 300.0, "used": False}
        location = redirect + ("&" if "?" in redirect else "?") + urlencode(
            {"code": code, "state": state}
        )
        return 302, {"code": code, "state": state}, {"Location": location}

    def _issue_pair(self, user: str) -> dict:
        access = "at_" + secrets.token_hex(16)
        refresh = "rt_" + secrets.token_hex(16)
        now = self.clock()
        self._access[access] = {"user": user, "expires": now + self.access_ttl}
        self._refresh[refresh] = {"user": user, "valid": True, "access": access}
        return {
            "access_token": access,
            "refresh_token": refresh,
            "expires_in": int(self.access_ttl),
            "user_id": user,
            "token_type": "Bearer",
        }

    def _token(self, request: Request):
        form = request.form()
        if form.get("client_id") != self.client_id or form.get("client_secret") != self.client_secret:
            raise HttpError(401, "invalid_client")
        grant = form.get("grant_type")
        with self._lock:
            if grant == "authorization_code":
                code = self._codes.get(form.get("code", ""))
                if code is None or code["used"] or self.clock() >= code["expires"]:
                    raise HttpError(400, "invalid_grant", "code unknown, used, or expired")
                code["used"] = True
                return 200, self._issue_pair(code["user"])
            if grant == "refresh_token":
                entry = self._refresh.get(form.get("refresh_token", ""))
                if entry is None or not entry["valid"]:
                    raise HttpError(400, "invalid_grant", "refresh token unknown or rotated")
                entry["valid"] = False
                self._access.pop(entry["access"], None)
                return 200, self._issue_pair(entry["user"])
        raise HttpError(400, "unsupported_grant_type", str(grant))

    def revoke_user(self, user: str):
        """Simulate the participant revoking vendor access."""
        with self._lock:
            for token in list(self._access):
                if self._access[token]["user"] == user:
                    del self._access[token]
            for token in list(self._refresh):
                if self._refresh[token]["user"] == user:
                    del self._refresh[token]

    # -- data endpoints ---------------------------------------------------------

    def _check_access(self, request: Request) -> str:
        bearer = request.bearer()
        with self._lock:
            entry = self._access.get(bearer)
            if entry is None or self.clock() >= entry["expires"]:
                raise HttpError(401, "invalid_token")
            return entry["user"]

    def _data(self, request: Request):
        user = self._check_access(request)
        data_type = request.params["dtype"]
        date = request.params["date"]
        if data_type not in DATA_TYPES:
            raise HttpError(404, "unknown_data_type", data_type)
        if request.params["user"] != user:
            raise HttpError(403, "forbidden", "token is for another user")
        with self._lock:
            self._data_request_count += 1
            if self._rate_every and self._data_request_count % self._rate_every == 0:
                raise HttpError(
                    429, "rate_limited", headers={"Retry-After": self._rate_retry_after}
                )
            fail_key = f"{user}/{data_type}/{date}"
            if self._fail_once.get(fail_key, 0) > 0:
                self._fail_once[fail_key] -= 1
                raise HttpError(503, "vendor_unavailable", "armed test failure")
        path = self.fixture_dir / user / data_type / f"{date}.json"
        if not path.exists():
            return 200, dict(_EMPTY[data_type], date=date)
        return 200, json.loads(path.read_text("utf-8"))

    def _control(self, request: Request):
        body = request.json()
        with self._lock:
            for key, count in (body.get("failOnce") or {}).items():
                self._fail_once[key] = int(count)
            if "rateLimitEvery" in body:
                every = body["rateLimitEvery"]
                self._rate_every = int(every) if every else None
                self._data_request_count = 0
            if "retryAfter" in body:
                self._rate_retry_after = int(body["retryAfter"])
            if body.get("expireAccessTokens"):
                for entry in self._access.values():
                    entry["expires"] = 0.0
        if body.get("revokeUser"):
            self.revoke_user(body["revokeUser"])
        return 200, {"ok": True}

    def routes(self) -> list[Route]:
        return [
            Route.make("GET", r"/oauth2/authorize", self._authorize),
            Route.make("POST", r"/oauth2/token", self._token),
            Route.make(
                "GET",
                r"/data/(?P<user>[A-Za-z0-9_-]+)/(?P<dtype>[a-z_]+)/(?P<date>[0-9-]+)",
                self._data,
            ),
            Route.make("POST", r"/_control", self._control),
        ]
