"""Questionnaire definitions, protocol documents, task scheduling, and completion.

Schedules are a pure function of (protocol, enrollment instant, fixed tz
offset, horizon): every entry anchors at local midnight of the enrollment
day plus its start offset, then repeats at exactly its period. Late
submissions are persisted but the task stays missed; completion rates
exclude instances that are still open.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field, replace

from .errors import ProtocolError, SchemaError
from .model import ObservationKey, SensorRecord
from .timeutil import DAY_SECONDS, local_date, local_midnight_epoch

INPUT_TYPES = ("choice", "integer", "text")


@dataclass(frozen=True)
class QuestionnaireItem:
    id: str
    text: str
    input_type: str
    choices: tuple[str, ...] | None = None
    score_map: dict | None = None


@dataclass(frozen=True)
class QuestionnaireDef:
    name: str
    items: tuple[QuestionnaireItem, ...]
    scored: bool = False

    def __post_init__(self):
        seen = set()
        for item in self.items:
            if item.id in seen:
                raise SchemaError(f"duplicate item id {item.id!r} in {self.name}")
            seen.add(item.id)
            if item.input_type not in INPUT_TYPES:
                raise SchemaError(f"item {item.id!r}: bad input type {item.input_type!r}")
            if item.input_type == "choice" and not item.choices:
                raise SchemaError(f"choice item {item.id!r} needs choices")
            if self.scored and item.input_type == "choice" and not item.score_map:
                raise SchemaError(f"scored questionnaire: item {item.id!r} lacks scoreMap")

    def item(self, item_id: str) -> QuestionnaireItem:
        for it in self.items:
            if it.id == item_id:
                return it
        raise SchemaError(f"unknown item id {item_id!r} in {self.name}")


@dataclass(frozen=True)
class ProtocolEntry:
    questionnaire_name: str
    repeat_period_days: int
    start_offset_days: int = 0
    completion_window_hours: float = 24.0
    reminders: tuple[float, ...] = ()


@dataclass(frozen=True)
class StudyProtocol:
    protocol_id: str
    entries: tuple[ProtocolEntry, ...]


@dataclass
class TaskInstance:
    questionnaire_name: str
    index: int
    open_at: float
    close_at: float
    notifications: list[float] = field(default_factory=list)
    status: str = "pending"


@dataclass
class Response:
    questionnaire_name: str
    task_open_at: float
    answers: dict
    started_at: float
    submitted_at: float
    score: float | None = None


def parse_questionnaire(document: str) -> QuestionnaireDef:
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"questionnaire is not valid JSON: {e}")
    items = []
    for it in raw.get("items", []):
        items.append(
            QuestionnaireItem(
                id=str(it["id"]),
                text=it.get("text", ""),
                input_type=it.get("inputType", "text"),
                choices=tuple(it["choices"]) if it.get("choices") else None,
                score_map=it.get("scoreMap"),
            )
        )
    return QuestionnaireDef(
        name=raw["name"], items=tuple(items), scored=bool(raw.get("scored", False))
    )


def parse_protocol(document: str) -> StudyProtocol:
    """Parse and fully validate a protocol document; all findings are reported."""
    try:
        raw = json.loads(document)
    except json.JSONDecodeError as e:
        raise ProtocolError(f"protocol is not valid JSON: {e}")
    findings = []
    entries = []
    seen_names = set()
    if "id" not in raw:
        findings.append("protocol missing 'id'")
    for i, entry in enumerate(raw.get("entries", [])):
        where = f"entries[{i}]"
        name = entry.get("questionnaire")
        if not name:
            findings.append(f"{where}: missing questionnaire name")
            continue
        if name in seen_names:
            findings.append(f"{where}: duplicate entry for {name!r}")
        seen_names.add(name)
        period = entry.get("repeatPeriodDays")
        offset = entry.get("startOffsetDays", 0)
        window = entry.get("completionWindowHours")
        reminders = entry.get("reminders", [])
        if not isinstance(period, int) or period < 1:
            findings.append(f"{where}: repeatPeriodDays must be a positive integer")
            continue
        if not isinstance(offset, int) or offset < 0:
            findings.append(f"{where}: startOffsetDays must be a non-negative integer")
            continue
        if not isinstance(window, (int, float)) or window <= 0:
            findings.append(f"{where}: completionWindowHours must be positive")
            continue
        if window > period * 24:
            findings.append(
                f"{where}: completion window {window}h exceeds repeat period {period}d"
            )
        bad_reminders = [r for r in reminders if not 0 <= r < window]
        if bad_reminders:
            findings.append(f"{where}: reminder offsets {bad_reminders} outside [0, window)")
        entries.append(
            ProtocolEntry(
                questionnaire_name=name,
                repeat_period_days=period,
                start_offset_days=offset,
                completion_window_hours=float(window),
                reminders=tuple(float(r) for r in reminders),
            )
        )
    if findings:
        raise ProtocolError("; ".join(findings), findings)
    return StudyProtocol(protocol_id=raw.get("id", ""), entries=tuple(entries))


def compute_schedule(
    protocol: StudyProtocol,
    enrolled_at: float,
    timezone_offset_minutes: int,
    horizon_days: int,
) -> list[TaskInstance]:
    """All task instances opening within ``horizon_days`` of enrollment.

    The anchor is local midnight of the enrollment day; the horizon is
    counted from that midnight, so participants enrolled hours apart on the
    same local day get identical schedules.
    """
    if horizon_days < 1:
        return []
    anchor = local_midnight_epoch(
        local_date(enrolled_at, timezone_offset_minutes), timezone_offset_minutes
    )
    end = anchor + horizon_days * DAY_SECONDS
    instances = []
    for entry in protocol.entries:
        open_at = anchor + entry.start_offset_days * DAY_SECONDS
        index = 0
        while open_at < end:
            close_at = open_at + entry.completion_window_hours * 3600.0
            instances.append(
                TaskInstance(
                    questionnaire_name=entry.questionnaire_name,
                    index=index,
                    open_at=open_at,
                    close_at=close_at,
                    notifications=[open_at + r * 3600.0 for r in entry.reminders],
                )
            )
            index += 1
            open_at += entry.repeat_period_days * DAY_SECONDS
    instances.sort(key=lambda t: (t.open_at, t.questionnaire_name, t.index))
    return instances


def score_answers(qdef: QuestionnaireDef, answers: dict) -> float | None:
    if not qdef.scored:
        return None
    total = 0.0
    for item_id, value in answers.items():
        item = qdef.item(item_id)
        if item.input_type == "choice" and item.score_map is not None:
            total += float(item.score_map[str(value)])
    return total


def record_response(
    task: TaskInstance,
    response: Response,
    qdef: QuestionnaireDef,
    key: ObservationKey,
) -> tuple[TaskInstance, SensorRecord]:
    """Validate and score a response; emit the stream record for the log.

    A submission after close is persisted (analytics keep the data) but the
    task stays missed.
    """
    if response.submitted_at < response.started_at:
        raise SchemaError("submittedAt before startedAt")
    for item_id, value in response.answers.items():
        item = qdef.item(item_id)
        if item.input_type == "choice":
            if str(value) not in item.choices:
                raise SchemaError(f"item {item_id!r}: {value!r} not a valid choice")
        elif item.input_type == "integer":
            if isinstance(value, bool) or not isinstance(value, int):
                raise SchemaError(f"item {item_id!r}: expected integer")
        elif not isinstance(value, str):
            raise SchemaError(f"item {item_id!r}: expected text")
    score = score_answers(qdef, response.answers)
    response.score = score
    completed = task.open_at <= response.submitted_at <= task.close_at
    updated = replace(task)
    updated.notifications = list(task.notifications)
    updated.status = "completed" if completed else "missed"
    payload = {
        "questionnaireName": task.questionnaire_name,
        "taskTime": task.open_at,
        "answersJson": json.dumps(response.answers, sort_keys=True),
    }
    if score is not None:
        payload["score"] = score
    record = SensorRecord(
        key=key,
        topic="questionnaire_response",
        schema_version=1,
        time=response.submitted_at,
        time_received=response.submitted_at,
        payload=payload,
    )
    return updated, record


def apply_response_records(
    instances: list[TaskInstance], response_records
) -> list[TaskInstance]:
    """Mark instances completed from questionnaire_response stream records.

    A record matches on (questionnaire name, taskTime == openAt) and counts
    only if submitted inside the task window.
    """
    by_key = {(t.questionnaire_name, t.open_at): t for t in instances}
    for record in response_records:
        name = record.payload.get("questionnaireName")
        task = by_key.get((name, record.payload.get("taskTime")))
        if task is not None and task.open_at <= record.time <= task.close_at:
            task.status = "completed"
    return instances


def completion_rate(
    instances: list[TaskInstance],
    range_start: float,
    range_end: float,
    as_of: float,
) -> float | None:
    """Completed / closed instances with closeAt in range; None when nothing closed.

    Instances still open at ``as_of`` are excluded from the denominator.
    """
    closed = [
        t
        for t in instances
        if range_start <= t.close_at < range_end and t.close_at <= as_of
    ]
    if not closed:
        return None
    done = sum(1 for t in closed if t.status == "completed")
    return done / len(closed)
