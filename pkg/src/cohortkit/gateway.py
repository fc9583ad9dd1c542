"""Authenticated HTTP front door: validate, stamp arrival time, append to the log.

Mixed batches are split: schema-valid records are stored atomically in one
log append, invalid ones are reported per index with a reason, so devices
draining heterogeneous caches never stall. A client-supplied batchId makes
retries idempotent within a 24 h window. Record keys are forced to the
token's identity; only registered sources are accepted.
"""

from __future__ import annotations

import os
import threading
import time
from dataclasses import dataclass, field

from .errors import CohortkitError, TokenExpired, TokenUnknown
from .httpkit import HttpError, Request, Route
from .model import ObservationKey, SensorRecord
from .registry import AccessToken, StudyRegistry
from .streamlog import LogStore

BATCH_RECORD_CAP = 10_000
BATCH_BYTE_CAP = 5 * 1024 * 1024
DEDUP_WINDOW_SECONDS = 86_400.0

ENVELOPE_KEYS = ("projectId", "userId", "sourceId")


@dataclass
class IngestReport:
    accepted: int = 0
    rejected: list = field(default_factory=list)  # (index, reason)

    def as_json(self) -> dict:
        return {"accepted": self.accepted, "rejected": [[i, r] for i, r in self.rejected]}


class IngestionGateway:
    def __init__(self, store: LogStore, registry: StudyRegistry, clock=None):
        self.store = store
        self.registry = registry
        self.clock = clock or time.time
        self._dedup: dict[tuple, tuple[float, IngestReport]] = {}
        self._dedup_lock = threading.Lock()
        self._last_append: float | None = None

    # -- operations -----------------------------------------------------------

    def authenticate(self, bearer: str) -> AccessToken:
        return self.registry.authenticate(bearer)

    def _check_dedup(self, key) -> IngestReport | None:
        now = self.clock()
        with self._dedup_lock:
            stale = [k for k, (t, _) in self._dedup.items() if now - t > DEDUP_WINDOW_SECONDS]
            for k in stale:
                del self._dedup[k]
            hit = self._dedup.get(key)
            return hit[1] if hit else None

    def ingest_batch(
        self,
        token: AccessToken,
        topic: str,
        raw_batch: list,
        batch_id: str | None = None,
    ) -> IngestReport:
        if not self.store.has_topic(topic):
            raise HttpError(404, "unknown_topic", topic)
        if len(raw_batch) > BATCH_RECORD_CAP:
            raise HttpError(413, "batch_too_large", f"{len(raw_batch)} > {BATCH_RECORD_CAP}")
        dedup_key = (token.token, topic, batch_id) if batch_id else None
        if dedup_key:
            prior = self._check_dedup(dedup_key)
            if prior is not None:
                return prior
        now = self.clock()
        schema_registry = self.store.registry
        report = IngestReport()
        valid: list[SensorRecord] = []
        for index, raw in enumerate(raw_batch):
            if not isinstance(raw, dict):
                report.rejected.append((index, "malformed"))
                continue
            claimed_user = raw.get("userId")
            claimed_project = raw.get("projectId")
            if (claimed_user is not None and claimed_user != token.user_id) or (
                claimed_project is not None and claimed_project != token.project_id
            ):
                report.rejected.append((index, "key_mismatch"))
                continue
            source = raw.get("sourceId")
            if not source or source not in token.allowed_sources:
                report.rejected.append((index, "source_unknown"))
                continue
            wire = {k: v for k, v in raw.items() if k not in ENVELOPE_KEYS}
            wire["timeReceived"] = now
            version = int(wire.pop("schemaVersion", 1))
            try:
                violations = schema_registry.validate(topic, version, wire)
            except CohortkitError as e:
                report.rejected.append((index, e.code))
                continue
            if violations:
                reasons = ";".join(f"{v.field}:{v.reason}" for v in violations)
                report.rejected.append((index, reasons))
                continue
            valid.append(
                SensorRecord(
                    key=ObservationKey(token.project_id, token.user_id, source),
                    topic=topic,
                    schema_version=version,
                    time=float(wire["time"]),
                    time_received=now,
                    payload=schema_registry.normalize(topic, version, wire),
                )
            )
        if valid:
            self.store.append(topic, valid)
            self._last_append = self.clock()
        report.accepted = len(valid)
        if dedup_key:
            with self._dedup_lock:
                self._dedup[dedup_key] = (now, report)
        return report

    def health(self) -> dict:
        writable = True
        probe = self.store.root / ".probe"
        try:
            with open(probe, "w") as fh:
                fh.write("x")
            os.unlink(probe)
        except OSError:
            writable = False
        age = None if self._last_append is None else max(0.0, self.clock() - self._last_append)
        return {
            "status": "ok" if writable else "degraded",
            "topics": len(self.store.topics()),
            "lastAppendAge": age,
        }

    # -- HTTP surface ---------------------------------------------------------

    def _auth_request(self, request: Request) -> AccessToken:
        bearer = request.bearer()
        try:
            return self.authenticate(bearer)
        except TokenExpired as e:
            raise HttpError(401, e.code, str(e))
        except TokenUnknown as e:
            raise HttpError(401, e.code, str(e))

    def routes(self) -> list[Route]:
        def ingest(request: Request):
            token = self._auth_request(request)
            if len(request.body) > BATCH_BYTE_CAP:
                raise HttpError(413, "batch_too_large", "body exceeds 5 MB")
            body = request.json()
            records = body.get("records")
            if not isinstance(records, list):
                raise HttpError(400, "bad_request", "body needs a 'records' list")
            report = self.ingest_batch(
                token, request.params["topic"], records, body.get("batchId")
            )
            return 200, report.as_json()

        def health(_):
            return 200, self.health()

        return [
            Route.make("POST", r"/v1/ingest/(?P<topic>[A-Za-z0-9_-]+)", ingest),
            Route.make("GET", r"/v1/health", health),
        ]
