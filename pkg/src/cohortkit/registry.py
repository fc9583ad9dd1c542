"""Projects, participants, sources, enrollment tokens, and gateway credentials.

State lives in memory and is rebuilt on open by replaying an append-only
journal of registry events (``<dataDir>/registry/journal.dat``, one JSON
object per line). A snapshot.json is written periodically and on close for
inspection; the journal is always the source of truth.

Recruitment modes follow the platform's three policies: everyone at once
(simultaneous), named cohorts each with their own start (batch), and
continuous enrollment until a target size or deadline (stream).
"""

from __future__ import annotations

import json
import os
import secrets
import threading
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

from .errors import (
    DuplicateProject,
    DuplicateSource,
    EnrollmentClosed,
    SchemaError,
    StorageError,
    TokenExpired,
    TokenUnknown,
    TokenUsed,
    UnknownProject,
    UnknownUser,
)
from .model import KEY_PATTERN

RECRUITMENT_MODES = ("simultaneous", "batch", "stream")
SOURCE_TYPES = ("phone", "wearable", "vendor")

DEFAULT_ACCESS_TTL_SECONDS = 30 * 86400

TZ_OFFSET_RANGE = (-720, 840)


@dataclass
class Project:
    project_id: str
    recruitment_mode: str
    protocol_id: str = ""
    target_size: int | None = None
    enrollment_deadline: float | None = None
    study_start: float | None = None
    cohort_starts: dict[str, float] = field(default_factory=dict)

    @property
    def cohort_labels(self) -> list[str]:
        return sorted(self.cohort_starts)

    def validate(self):
        if not KEY_PATTERN.match(self.project_id):
            raise SchemaError(f"bad projectId {self.project_id!r}")
        if self.recruitment_mode not in RECRUITMENT_MODES:
            raise SchemaError(f"unknown recruitment mode {self.recruitment_mode!r}")
        if self.recruitment_mode == "stream":
            if self.target_size is None and self.enrollment_deadline is None:
                raise SchemaError("stream mode needs targetSize or enrollmentDeadline")
            if self.target_size is not None and self.target_size < 1:
                raise SchemaError("targetSize must be positive")
        elif self.recruitment_mode == "simultaneous":
            if self.study_start is None:
                raise SchemaError("simultaneous mode needs studyStart")
        elif self.recruitment_mode == "batch":
            if not self.cohort_starts:
                raise SchemaError("batch mode needs at least one cohort with a start time")


@dataclass
class Participant:
    user_id: str
    project_id: str
    enrolled_at: float
    timezone_offset_minutes: int
    cohort: str | None = None
    status: str = "active"


@dataclass
class EnrollmentToken:
    token: str
    project_id: str
    expires_at: float
    used_by: str | None = None
    cohort: str | None = None


@dataclass
class Source:
    source_id: str
    user_id: str
    source_type: str
    registered_at: float


@dataclass
class AccessToken:
    token: str
    user_id: str
    project_id: str
    allowed_sources: list[str]
    expiry: float
    revoked: bool = False


class StudyRegistry:
    """Journaled registry; all mutations serialize through the journal writer."""

    def __init__(
        self,
        data_dir,
        clock=None,
        fsync: bool = True,
        access_ttl_seconds: float = DEFAULT_ACCESS_TTL_SECONDS,
        snapshot_every: int = 100,
    ):
        self.root = Path(data_dir) / "registry"
        self.root.mkdir(parents=True, exist_ok=True)
        self.journal_path = self.root / "journal.dat"
        self.clock = clock or time.time
        self.fsync = fsync
        self.access_ttl_seconds = access_ttl_seconds
        self.snapshot_every = snapshot_every
        self._lock = threading.RLock()
        self._seq = 0
        self.projects: dict[str, Project] = {}
        self.protocols: dict[str, str] = {}
        self.participants: dict[str, Participant] = {}
        self.enroll_tokens: dict[str, EnrollmentToken] = {}
        self.sources: dict[str, Source] = {}
        self.access_tokens: dict[str, AccessToken] = {}
        self._user_counter = 0
        self._replay()

    # -- journal -----------------------------------------------------------

    def _replay(self):
        if not self.journal_path.exists():
            return
        with open(self.journal_path, "rb") as fh:
            raw = fh.read()
        lines = raw.split(b"\n")
        good_bytes = 0
        for i, line in enumerate(lines):
            if not line:
                if i < len(lines) - 1:
                    good_bytes += 1
                continue
            try:
                event = json.loads(line.decode("utf-8"))
            except (json.JSONDecodeError, UnicodeDecodeError):
                if any(rest for rest in lines[i + 1 :]):
                    raise StorageError(f"corrupt journal line {i}")
                # torn tail from a crash mid-write: drop it so appends stay line-aligned
                with open(self.journal_path, "r+b") as fh:
                    fh.truncate(good_bytes)
                break
            self._apply(event)
            self._seq = event["seq"]
            good_bytes += len(line) + 1

    def _journal(self, kind: str, data: dict):
        self._seq += 1
        event = {"seq": self._seq, "kind": kind, **data}
        with open(self.journal_path, "a", encoding="utf-8") as fh:
            fh.write(json.dumps(event, sort_keys=True) + "\n")
            fh.flush()
            if self.fsync:
                os.fsync(fh.fileno())
        self._apply(event)
        if self.snapshot_every and self._seq % self.snapshot_every == 0:
            self.write_snapshot()

    def _apply(self, event: dict):
        kind = event["kind"]
        if kind == "project_created":
            p = Project(
                project_id=event["projectId"],
                recruitment_mode=event["mode"],
                protocol_id=event.get("protocolId", ""),
                target_size=event.get("targetSize"),
                enrollment_deadline=event.get("enrollmentDeadline"),
                study_start=event.get("studyStart"),
                cohort_starts=event.get("cohortStarts") or {},
            )
            self.projects[p.project_id] = p
        elif kind == "protocol_stored":
            self.protocols[event["protocolId"]] = event["document"]
        elif kind == "enroll_token":
            t = EnrollmentToken(
                token=event["token"],
                project_id=event["projectId"],
                expires_at=event["expiresAt"],
                cohort=event.get("cohort"),
            )
            self.enroll_tokens[t.token] = t
        elif kind == "token_redeemed":
            token = self.enroll_tokens[event["token"]]
            token.used_by = event["userId"]
            self.participants[event["userId"]] = Participant(
                user_id=event["userId"],
                project_id=token.project_id,
                enrolled_at=event["enrolledAt"],
                timezone_offset_minutes=event["tzOffsetMinutes"],
                cohort=token.cohort,
            )
            self.access_tokens[event["accessToken"]] = AccessToken(
                token=event["accessToken"],
                user_id=event["userId"],
                project_id=token.project_id,
                allowed_sources=[],
                expiry=event["accessExpiry"],
            )
            self._user_counter = max(self._user_counter, int(event["userId"][1:]))
        elif kind == "source_registered":
            s = Source(
                source_id=event["sourceId"],
                user_id=event["userId"],
                source_type=event["sourceType"],
                registered_at=event["registeredAt"],
            )
            self.sources[s.source_id] = s
            for at in self.access_tokens.values():
                if at.user_id == s.user_id:
                    at.allowed_sources.append(s.source_id)
        elif kind == "withdrawn":
            user = self.participants[event["userId"]]
            user.status = "withdrawn"
            for at in self.access_tokens.values():
                if at.user_id == user.user_id:
                    at.revoked = True
        else:
            raise StorageError(f"unknown journal event kind {kind!r}")

    def write_snapshot(self):
        with self._lock:
            snap = {"seq": self._seq, "state": self.state_fingerprint()}
        tmp = self.root / "snapshot.tmp"
        tmp.write_text(json.dumps(snap, sort_keys=True), "utf-8")
        os.replace(tmp, self.root / "snapshot.json")

    def state_fingerprint(self) -> dict:
        """Canonical dict of all registry state, for replay-equality checks."""
        with self._lock:
            return {
                "projects": {k: asdict(v) for k, v in sorted(self.projects.items())},
                "protocols": dict(sorted(self.protocols.items())),
                "participants": {k: asdict(v) for k, v in sorted(self.participants.items())},
                "enroll_tokens": {k: asdict(v) for k, v in sorted(self.enroll_tokens.items())},
                "sources": {k: asdict(v) for k, v in sorted(self.sources.items())},
                "access_tokens": {k: asdict(v) for k, v in sorted(self.access_tokens.items())},
            }

    # -- projects and protocols ---------------------------------------------

    def create_project(self, project: Project) -> None:
        project.validate()
        with self._lock:
            if project.project_id in self.projects:
                raise DuplicateProject(project.project_id)
            self._journal(
                "project_created",
                {
                    "projectId": project.project_id,
                    "mode": project.recruitment_mode,
                    "protocolId": project.protocol_id,
                    "targetSize": project.target_size,
                    "enrollmentDeadline": project.enrollment_deadline,
                    "studyStart": project.study_start,
                    "cohortStarts": project.cohort_starts,
                },
            )

    def store_protocol(self, protocol_id: str, document: str) -> None:
        from .questionnaire import parse_protocol

        parse_protocol(document)  # reject invalid documents up front
        with self._lock:
            self._journal("protocol_stored", {"protocolId": protocol_id, "document": document})

    def get_project(self, project_id: str) -> Project:
        with self._lock:
            project = self.projects.get(project_id)
        if project is None:
            raise UnknownProject(project_id)
        return project

    def get_protocol_document(self, protocol_id: str) -> str:
        with self._lock:
            doc = self.protocols.get(protocol_id)
        if doc is None:
            raise UnknownProject(f"no protocol {protocol_id!r}")
        return doc

    # -- enrollment ---------------------------------------------------------

    def _enrolled_count(self, project_id: str) -> int:
        return sum(1 for p in self.participants.values() if p.project_id == project_id)

    def _check_enrollment_open(self, project: Project, cohort: str | None, now: float):
        mode = project.recruitment_mode
        if mode == "stream":
            if (
                project.target_size is not None
                and self._enrolled_count(project.project_id) >= project.target_size
            ):
                raise EnrollmentClosed(f"{project.project_id}: target size reached")
            if project.enrollment_deadline is not None and now >= project.enrollment_deadline:
                raise EnrollmentClosed(f"{project.project_id}: enrollment deadline passed")
        elif mode == "simultaneous":
            if now >= project.study_start:
                raise EnrollmentClosed(f"{project.project_id}: study already started")
        elif mode == "batch":
            if cohort is None:
                raise EnrollmentClosed(f"{project.project_id}: batch mode requires a cohort")
            start = project.cohort_starts.get(cohort)
            if start is None:
                raise EnrollmentClosed(f"{project.project_id}: unknown cohort {cohort!r}")
            if now >= start:
                raise EnrollmentClosed(f"{project.project_id}: cohort {cohort!r} already started")

    def generate_enrollment_token(
        self, project_id: str, ttl_seconds: float, cohort: str | None = None
    ) -> EnrollmentToken:
        with self._lock:
            project = self.get_project(project_id)
            now = self.clock()
            self._check_enrollment_open(project, cohort, now)
            token = "enr_" + secrets.token_hex(16)
            self._journal(
                "enroll_token",
                {
                    "token": token,
                    "projectId": project_id,
                    "expiresAt": now + ttl_seconds,
                    "cohort": cohort,
                },
            )
            return self.enroll_tokens[token]

    def redeem_token(self, token: str, timezone_offset_minutes: int) -> dict:
        if not TZ_OFFSET_RANGE[0] <= timezone_offset_minutes <= TZ_OFFSET_RANGE[1]:
            raise SchemaError(f"timezone offset {timezone_offset_minutes} out of range")
        with self._lock:
            entry = self.enroll_tokens.get(token)
            if entry is None:
                raise TokenUnknown("unknown enrollment token")
            if entry.used_by is not None:
                raise TokenUsed("enrollment token already used")
            now = self.clock()
            if now >= entry.expires_at:
                raise TokenExpired("enrollment token expired")
            project = self.get_project(entry.project_id)
            self._check_enrollment_open(project, entry.cohort, now)
            user_id = f"u{self._user_counter + 1:04d}"
            access = "acc_" + secrets.token_hex(16)
            self._journal(
                "token_redeemed",
                {
                    "token": token,
                    "userId": user_id,
                    "enrolledAt": now,
                    "tzOffsetMinutes": timezone_offset_minutes,
                    "accessToken": access,
                    "accessExpiry": now + self.access_ttl_seconds,
                },
            )
            return {"userId": user_id, "accessToken": access}

    # -- sources and participants ----------------------------------------------

    def register_source(self, user_id: str, source_type: str) -> Source:
        if source_type not in SOURCE_TYPES:
            raise SchemaError(f"unknown source type {source_type!r}")
        with self._lock:
            user = self.participants.get(user_id)
            if user is None or user.status != "active":
                raise UnknownUser(f"no active participant {user_id!r}")
            mine = [s for s in self.sources.values() if s.user_id == user_id]
            if source_type == "vendor" and any(s.source_type == "vendor" for s in mine):
                raise DuplicateSource(f"{user_id} already has a vendor source")
            source_id = f"{user_id}-{source_type}-{sum(1 for s in mine if s.source_type == source_type) + 1}"
            self._journal(
                "source_registered",
                {
                    "sourceId": source_id,
                    "userId": user_id,
                    "sourceType": source_type,
                    "registeredAt": self.clock(),
                },
            )
            return self.sources[source_id]

    def withdraw(self, user_id: str) -> None:
        with self._lock:
            if user_id not in self.participants:
                raise UnknownUser(user_id)
            if self.participants[user_id].status == "withdrawn":
                return
            self._journal("withdrawn", {"userId": user_id})

    def list_participants(self, project_id: str) -> list[Participant]:
        self.get_project(project_id)
        with self._lock:
            return sorted(
                (p for p in self.participants.values() if p.project_id == project_id),
                key=lambda p: p.user_id,
            )

    def get_participant(self, user_id: str) -> Participant:
        with self._lock:
            user = self.participants.get(user_id)
        if user is None:
            raise UnknownUser(user_id)
        return user

    def vendor_source(self, user_id: str) -> Source | None:
        with self._lock:
            for s in self.sources.values():
                if s.user_id == user_id and s.source_type == "vendor":
                    return s
        return None

    # -- gateway authentication ----------------------------------------------

    def authenticate(self, bearer: str) -> AccessToken:
        with self._lock:
            token = self.access_tokens.get(bearer)
            if token is None or token.revoked:
                raise TokenUnknown("unknown access token")
            if self.clock() >= token.expiry:
                raise TokenExpired("access token expired")
            return token

    def close(self):
        self.write_snapshot()
