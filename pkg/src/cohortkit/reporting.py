"""Compliance analytics (hours-per-day contiguity, questionnaire completion)
and partitioned raw export with round-trip fidelity.

Exports partition by UTC hour of event time (so files merge across
participants); reports attribute records to participant-local days. Both
conventions coexist deliberately and are documented here and in the README.
"""

from __future__ import annotations

import csv
import datetime as _dt
import hashlib
import io
import json
from dataclasses import dataclass
from pathlib import Path

from . import recordio
from .errors import InvalidRange, StorageError
from .model import SchemaRegistry
from .questionnaire import apply_response_records, completion_rate, compute_schedule, parse_protocol
from .registry import StudyRegistry
from .streamlog import LogStore
from .timeutil import DAY_SECONDS, local_midnight_epoch

CSV_KWARGS = {"lineterminator": "\n"}


@dataclass
class ContiguityMatrix:
    user_id: str
    dates: list[_dt.date]
    modalities: list[str]
    hours: list[list]  # dates x modalities; int in [0, 24], None = modality missing

    def total_hours(self) -> float:
        return sum(v for row in self.hours for v in row if v is not None)


def contiguity_matrix(
    store: LogStore,
    user_id: str,
    tz_offset_min: int,
    dates: list[_dt.date],
    modalities: list[str],
) -> ContiguityMatrix:
    """Distinct local hours with at least one record, per (day, modality).

    Topics absent from the log still get rows, filled with zeros.
    """
    if not dates:
        raise InvalidRange("empty date range")
    start = local_midnight_epoch(dates[0], tz_offset_min)
    end = local_midnight_epoch(dates[-1], tz_offset_min) + DAY_SECONDS
    index = {d: i for i, d in enumerate(dates)}
    seen: list[list[set]] = [[set() for _ in modalities] for _ in dates]
    for m, topic in enumerate(modalities):
        if not store.has_topic(topic):
            continue
        for _, record in store.read_all(topic):
            if record.key.user_id != user_id or not start <= record.time < end:
                continue
            shifted = record.time + tz_offset_min * 60.0
            date = _dt.date(1970, 1, 1) + _dt.timedelta(days=int(shifted // DAY_SECONDS))
            slot = index.get(date)
            if slot is not None:
                seen[slot][m].add(int((shifted % DAY_SECONDS) // 3600.0))
    hours = [[len(cell) for cell in row] for row in seen]
    return ContiguityMatrix(user_id, list(dates), list(modalities), hours)


def write_contiguity_csv(matrix: ContiguityMatrix, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, **CSV_KWARGS)
        w.writerow(["localDate"] + matrix.modalities)
        for date, row in zip(matrix.dates, matrix.hours):
            w.writerow([date.isoformat()] + ["" if v is None else v for v in row])


# ---------------------------------------------------------------------------
# questionnaire completion
# ---------------------------------------------------------------------------


@dataclass
class CompletionRow:
    user_id: str
    closed: int
    completed: int
    rate: float | None


@dataclass
class CompletionReport:
    project_id: str
    rows: list[CompletionRow]
    project_mean: float | None


def completion_report(
    store: LogStore,
    registry: StudyRegistry,
    project_id: str,
    range_start: _dt.date,
    range_end: _dt.date,
    as_of: float,
) -> CompletionReport:
    """Per-user completion over closed instances in range; mean skips null users."""
    project = registry.get_project(project_id)
    protocol = parse_protocol(registry.get_protocol_document(project.protocol_id))
    responses_by_user: dict[str, list] = {}
    if store.has_topic("questionnaire_response"):
        for _, record in store.read_all("questionnaire_response"):
            if record.key.project_id == project_id:
                responses_by_user.setdefault(record.key.user_id, []).append(record)
    rows = []
    rates = []
    for participant in registry.list_participants(project_id):
        tz = participant.timezone_offset_minutes
        horizon = max(1, (range_end - range_start).days + 2)
        instances = compute_schedule(protocol, participant.enrolled_at, tz, horizon)
        apply_response_records(instances, responses_by_user.get(participant.user_id, []))
        t0 = local_midnight_epoch(range_start, tz)
        t1 = local_midnight_epoch(range_end, tz) + DAY_SECONDS
        closed = [t for t in instances if t0 <= t.close_at < t1 and t.close_at <= as_of]
        rate = completion_rate(instances, t0, t1, as_of)
        rows.append(
            CompletionRow(
                participant.user_id,
                len(closed),
                sum(1 for t in closed if t.status == "completed"),
                rate,
            )
        )
        if rate is not None:
            rates.append(rate)
    mean = sum(rates) / len(rates) if rates else None
    return CompletionReport(project_id, rows, mean)


def write_completion_csv(report: CompletionReport, path) -> None:
    with open(path, "w", encoding="utf-8", newline="") as fh:
        w = csv.writer(fh, **CSV_KWARGS)
        w.writerow(["userId", "closedInstances", "completed", "completionRate"])
        for row in report.rows:
            w.writerow(
                [
                    row.user_id,
                    row.closed,
                    row.completed,
                    "" if row.rate is None else repr(row.rate),
                ]
            )
        w.writerow(
            ["PROJECT_MEAN", "", "", "" if report.project_mean is None else repr(report.project_mean)]
        )


# ---------------------------------------------------------------------------
# partitioned export
# ---------------------------------------------------------------------------


def _hour_name(epoch: float) -> str:
    stamp = _dt.datetime.fromtimestamp(int(epoch // 3600) * 3600, tz=_dt.timezone.utc)
    return stamp.strftime("%Y%m%d_%H00")


def export_raw(
    store: LogStore,
    project_id: str,
    topics: list[str],
    t0: float,
    t1: float,
    out_dir,
) -> dict:
    """Write <out>/<project>/<user>/<topic>/<YYYYMMDD_HH00>.csv partitions + manifest.

    Deterministic: rows keep log-offset order inside each file, the manifest
    sorts its keys, and re-exporting an identical log is byte-identical.
    """
    out = Path(out_dir)
    try:
        out.mkdir(parents=True, exist_ok=True)
        probe = out / ".probe"
        probe.write_text("x")
        probe.unlink()
    except OSError as e:
        raise StorageError(f"output dir not writable: {e}")
    buffers: dict[tuple, io.StringIO] = {}
    counts: dict[tuple, int] = {}
    topic_totals = {t: 0 for t in topics}
    for topic in topics:
        schema = store.schema_for(topic)
        for _, record in store.read_all(topic):
            if record.key.project_id != project_id or not t0 <= record.time < t1:
                continue
            part = (record.key.user_id, topic, _hour_name(record.time))
            buf = buffers.get(part)
            if buf is None:
                buf = io.StringIO()
                csv.writer(buf, **CSV_KWARGS).writerow(recordio.canonical_header(schema))
                buffers[part] = buf
                counts[part] = 0
            csv.writer(buf, **CSV_KWARGS).writerow(recordio.record_to_row(record, schema))
            counts[part] += 1
            topic_totals[topic] += 1
    files = []
    for (user_id, topic, hour) in sorted(buffers):
        rel = f"{project_id}/{user_id}/{topic}/{hour}.csv"
        path = out / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        data = buffers[(user_id, topic, hour)].getvalue().encode("utf-8")
        path.write_bytes(data)
        files.append(
            {
                "path": rel,
                "records": counts[(user_id, topic, hour)],
                "sha256": hashlib.sha256(data).hexdigest(),
            }
        )
    manifest = {
        "projectId": project_id,
        "topicCounts": dict(sorted(topic_totals.items())),
        "files": files,
    }
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=1, sort_keys=True), "utf-8"
    )
    return manifest


def parse_export(out_dir, registry: SchemaRegistry) -> dict:
    """Read an export tree back to records per topic, in manifest file order."""
    out = Path(out_dir)
    manifest = json.loads((out / "manifest.json").read_text("utf-8"))
    records: dict[str, list] = {}
    for entry in manifest["files"]:
        rel = entry["path"]
        topic = rel.split("/")[2]
        text = (out / rel).read_text("utf-8")
        parsed = recordio.parse_records(text, topic, registry, header=True)
        if len(parsed) != entry["records"]:
            raise StorageError(f"{rel}: manifest says {entry['records']}, file has {len(parsed)}")
        records.setdefault(topic, []).extend(parsed)
    return records
