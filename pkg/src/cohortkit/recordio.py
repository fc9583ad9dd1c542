"""Serialized record line format: the bit-exact text contract for records.

One record per line, UTF-8, RFC-4180 CSV with ``\\n`` line endings. Columns:
the envelope (projectId, userId, sourceId, schemaVersion, time, timeReceived)
followed by payload fields in schema order. Floats are written with Python's
shortest round-trip repr; optional fields absent from a payload serialize as
empty cells. The topic itself is carried out of band (file name or header
context), never per row.
"""

from __future__ import annotations

import csv
import io

from .errors import SchemaError
from .model import ObservationKey, SchemaRegistry, SensorRecord, TopicSchema

ENVELOPE = ("projectId", "userId", "sourceId", "schemaVersion", "time", "timeReceived")


def canonical_header(schema: TopicSchema) -> list[str]:
    return list(ENVELOPE) + schema.field_names()


def _format_value(spec_kind: str, value) -> str:
    if value is None:
        return ""
    if spec_kind == "float64":
        return repr(float(value))
    if spec_kind == "int64":
        return str(int(value))
    return str(value)


def record_to_row(record: SensorRecord, schema: TopicSchema) -> list[str]:
    row = [
        record.key.project_id,
        record.key.user_id,
        record.key.source_id,
        str(record.schema_version),
        repr(float(record.time)),
        repr(float(record.time_received)),
    ]
    for f in schema.fields:
        row.append(_format_value(f.kind, record.payload.get(f.name)))
    return row


def row_to_record(row: list[str], topic: str, schema: TopicSchema) -> SensorRecord:
    expected = len(ENVELOPE) + len(schema.fields)
    if len(row) != expected:
        raise SchemaError(f"row has {len(row)} cells, schema expects {expected}")
    payload = {}
    for f, cell in zip(schema.fields, row[len(ENVELOPE):]):
        if cell == "":
            if not f.optional:
                raise SchemaError(f"required field {f.name!r} empty in row")
            continue
        if f.kind == "float64":
            payload[f.name] = float(cell)
        elif f.kind == "int64":
            payload[f.name] = int(cell)
        else:
            payload[f.name] = cell
    return SensorRecord(
        key=ObservationKey(row[0], row[1], row[2]),
        topic=topic,
        schema_version=int(row[3]),
        time=float(row[4]),
        time_received=float(row[5]),
        payload=payload,
    )


def _writer(buf):
    return csv.writer(buf, lineterminator="\n")


def serialize_records(records, schema: TopicSchema, header: bool = True) -> str:
    buf = io.StringIO()
    w = _writer(buf)
    if header:
        w.writerow(canonical_header(schema))
    for record in records:
        w.writerow(record_to_row(record, schema))
    return buf.getvalue()


def record_to_line(record: SensorRecord, schema: TopicSchema) -> str:
    buf = io.StringIO()
    _writer(buf).writerow(record_to_row(record, schema))
    return buf.getvalue()


def parse_records(
    text: str, topic: str, registry: SchemaRegistry, header: bool = True
) -> list[SensorRecord]:
    """Parse serialized lines back to records; schema version comes per row."""
    rows = list(csv.reader(io.StringIO(text)))
    if header and rows:
        first = rows.pop(0)
        if first[: len(ENVELOPE)] != list(ENVELOPE):
            raise SchemaError(f"bad header for topic {topic!r}: {first[:6]}")
    records = []
    for row in rows:
        if not row:
            continue
        schema = registry.get(topic, int(row[3]))
        records.append(row_to_record(row, topic, schema))
    return records


def wire_payload(record: SensorRecord) -> dict:
    """Full field map as sent on the wire (payload plus reserved time fields)."""
    out = {"time": record.time, "timeReceived": record.time_received}
    out.update(record.payload)
    return out
