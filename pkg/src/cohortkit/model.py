"""Observation keys, topic schemas, record validation, and the built-in topic catalog.

Every producer and consumer goes through :class:`SchemaRegistry`: payloads are
validated strictly (unknown fields rejected) against a named schema version,
and every schema implicitly carries required float64 ``time`` / ``timeReceived``
fields in seconds since the Unix epoch, UTC.
"""

from __future__ import annotations

import re
import threading
from dataclasses import dataclass, field

from .errors import DuplicateField, SchemaError, UnknownSchema

KEY_PATTERN = re.compile(r"^[A-Za-z0-9_-]{1,64}$")

RESERVED_FIELDS = ("time", "timeReceived")

FIELD_KINDS = ("float64", "int64", "string", "enum")

# Device clocks may run ahead of the gateway; beyond this bound the record is
# rejected so daily windowing stays sane.
CLOCK_SKEW_MAX_SECONDS = 300.0


@dataclass(frozen=True)
class ObservationKey:
    """Identity of a measurement: (project, user, source)."""

    project_id: str
    user_id: str
    source_id: str

    def __post_init__(self):
        for name, value in (
            ("projectId", self.project_id),
            ("userId", self.user_id),
            ("sourceId", self.source_id),
        ):
            if not isinstance(value, str) or not KEY_PATTERN.match(value):
                raise SchemaError(
                    f"{name} must be 1-64 chars of [A-Za-z0-9_-], got {value!r}"
                )


@dataclass(frozen=True)
class FieldSpec:
    name: str
    kind: str
    unit: str = ""
    enum_values: tuple[str, ...] | None = None
    optional: bool = False

    def __post_init__(self):
        if self.kind not in FIELD_KINDS:
            raise SchemaError(f"field {self.name!r}: unknown kind {self.kind!r}")
        if self.name in RESERVED_FIELDS:
            raise SchemaError(f"field name {self.name!r} is reserved")
        if self.kind == "enum":
            if not self.enum_values:
                raise SchemaError(f"enum field {self.name!r} needs enum_values")
        elif self.enum_values is not None:
            raise SchemaError(f"field {self.name!r}: enum_values only valid for enums")


@dataclass(frozen=True)
class TopicSchema:
    name: str
    version: int
    fields: tuple[FieldSpec, ...]

    def __post_init__(self):
        if not KEY_PATTERN.match(self.name):
            raise SchemaError(f"bad topic name {self.name!r}")
        if self.version < 1:
            raise SchemaError("schema version must be positive")
        seen = set()
        for f in self.fields:
            if f.name in seen:
                raise DuplicateField(f"duplicate field {f.name!r} in {self.name}")
            seen.add(f.name)

    def field_names(self) -> list[str]:
        return [f.name for f in self.fields]

    def body(self) -> tuple:
        """Structural identity ignoring the version number."""
        return (self.name, self.fields)


@dataclass(frozen=True)
class Violation:
    field: str
    reason: str
    detail: str = ""


@dataclass(frozen=True)
class SensorRecord:
    """One validated measurement; payload excludes the reserved time fields."""

    key: ObservationKey
    topic: str
    schema_version: int
    time: float
    time_received: float
    payload: dict

    def dedup_key(self) -> tuple:
        return (self.key, self.topic, self.time)


def _check_value(spec: FieldSpec, value) -> Violation | None:
    if spec.kind == "float64":
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            return Violation(spec.name, "wrong_type", "expected float64")
    elif spec.kind == "int64":
        if isinstance(value, bool) or not isinstance(value, int):
            return Violation(spec.name, "wrong_type", "expected int64")
    elif spec.kind == "string":
        if not isinstance(value, str):
            return Violation(spec.name, "wrong_type", "expected string")
    elif spec.kind == "enum":
        if not isinstance(value, str):
            return Violation(spec.name, "wrong_type", "expected enum string")
        elif value not in spec.enum_values:
            return Violation(spec.name, "bad_enum", f"{value!r} not in {spec.enum_values}")
    return None


class SchemaRegistry:
    """Versioned schema store.

    Registration is serialized and idempotent: re-registering a structurally
    identical schema returns the existing version; a changed body for a known
    name is assigned the next version. Validation is pure and lock-free.
    """

    def __init__(self):
        self._lock = threading.Lock()
        self._by_name: dict[str, list[TopicSchema]] = {}

    def register(self, name: str, fields: list[FieldSpec] | tuple[FieldSpec, ...]) -> int:
        candidate_fields = tuple(fields)
        with self._lock:
            versions = self._by_name.setdefault(name, [])
            probe = TopicSchema(name, len(versions) + 1, candidate_fields)
            for existing in reversed(versions):
                if existing.body() == probe.body():
                    return existing.version
            versions.append(probe)
            return probe.version

    def register_schema(self, schema: TopicSchema) -> int:
        return self.register(schema.name, schema.fields)

    def get(self, name: str, version: int) -> TopicSchema:
        versions = self._by_name.get(name)
        if not versions or not (1 <= version <= len(versions)):
            raise UnknownSchema(f"no schema {name!r} v{version}")
        return versions[version - 1]

    def latest(self, name: str) -> TopicSchema:
        versions = self._by_name.get(name)
        if not versions:
            raise UnknownSchema(f"no schema {name!r}")
        return versions[-1]

    def has(self, name: str, version: int | None = None) -> bool:
        versions = self._by_name.get(name)
        if not versions:
            return False
        return version is None or 1 <= version <= len(versions)

    def names(self) -> list[str]:
        return sorted(self._by_name)

    def validate(self, topic: str, version: int, payload: dict) -> list[Violation]:
        """Validate a wire payload (including time/timeReceived) against a schema.

        Returns every violation, not just the first; an empty list means Ok.
        """
        schema = self.get(topic, version)
        violations = []
        for reserved in RESERVED_FIELDS:
            value = payload.get(reserved)
            if value is None:
                violations.append(Violation(reserved, "missing"))
            elif isinstance(value, bool) or not isinstance(value, (int, float)):
                violations.append(Violation(reserved, "wrong_type", "expected float64"))
        if not violations:
            skew = float(payload["time"]) - float(payload["timeReceived"])
            if skew > CLOCK_SKEW_MAX_SECONDS:
                violations.append(
                    Violation(
                        "time",
                        "clock_skew",
                        f"time exceeds timeReceived by {skew:.0f}s (max {CLOCK_SKEW_MAX_SECONDS:.0f}s)",
                    )
                )
        specs = {f.name: f for f in schema.fields}
        for f in schema.fields:
            if f.name not in payload:
                if not f.optional:
                    violations.append(Violation(f.name, "missing"))
                continue
            bad = _check_value(f, payload[f.name])
            if bad:
                violations.append(bad)
        for name in payload:
            if name not in specs and name not in RESERVED_FIELDS:
                violations.append(Violation(name, "unknown"))
        return violations

    def normalize(self, topic: str, version: int, payload: dict) -> dict:
        """Coerce a valid wire payload to canonical types (float64 stored as float)."""
        schema = self.get(topic, version)
        out = {}
        for f in schema.fields:
            if f.name in payload:
                value = payload[f.name]
                out[f.name] = float(value) if f.kind == "float64" else value
        return out


def validate_record(registry: SchemaRegistry, topic: str, version: int, payload: dict):
    return registry.validate(topic, version, payload)


def _f(name, unit=""):
    return FieldSpec(name, "float64", unit)


def _i(name, unit=""):
    return FieldSpec(name, "int64", unit)


def canonical_topics() -> list[TopicSchema]:
    """The built-in topic catalog covering phone, wearable, and vendor sources.

    The wearable PPG raw waveform and LED current channels have no defined
    units or rates and are deliberately not cataloged.
    """
    return [
        TopicSchema("phone_acceleration", 1, (_f("x", "g"), _f("y", "g"), _f("z", "g"))),
        TopicSchema("phone_light", 1, (_f("lux", "lx"),)),
        TopicSchema(
            "phone_relative_location",
            1,
            (_f("latitude", "deg"), _f("longitude", "deg"), _f("accuracy", "m")),
        ),
        TopicSchema("phone_bluetooth_devices", 1, (_i("count", "count"),)),
        TopicSchema(
            "phone_usage_event",
            1,
            (FieldSpec("event", "enum", enum_values=("UNLOCK", "LOCK")),),
        ),
        TopicSchema("phone_step_count", 1, (_i("steps", "count"), _i("epochSeconds", "s"))),
        TopicSchema("wearable_bvp", 1, (_f("value"),)),
        TopicSchema("wearable_ibi", 1, (_f("intervalMs", "ms"),)),
        TopicSchema("wearable_eda", 1, (_f("microsiemens", "uS"),)),
        TopicSchema("wearable_temperature", 1, (_f("celsius", "degC"),)),
        TopicSchema("wearable_heart_rate", 1, (_f("bpm", "bpm"),)),
        TopicSchema(
            "vendor_sleep_stage",
            1,
            (
                FieldSpec("stage", "enum", enum_values=("wake", "light", "deep", "rem")),
                _i("durationSeconds", "s"),
            ),
        ),
        TopicSchema("vendor_intraday_steps", 1, (_i("steps", "count"),)),
        TopicSchema("vendor_resting_heart_rate", 1, (_f("bpm", "bpm"),)),
        TopicSchema(
            "questionnaire_response",
            1,
            (
                FieldSpec("questionnaireName", "string"),
                _f("taskTime", "s"),
                FieldSpec("answersJson", "string"),
                FieldSpec("score", "float64", optional=True),
            ),
        ),
    ]


def install_catalog(registry: SchemaRegistry) -> list[str]:
    """Register every catalog schema; returns the topic names."""
    names = []
    for schema in canonical_topics():
        registry.register_schema(schema)
        names.append(schema.name)
    return names


def catalog_document(registry: SchemaRegistry) -> str:
    """Render all registered schemas as one self-describing text document."""
    lines = []
    for name in registry.names():
        version = 1
        while registry.has(name, version):
            schema = registry.get(name, version)
            lines.append(f"schema {schema.name} v{schema.version}")
            lines.append("  field time float64 unit=s required")
            lines.append("  field timeReceived float64 unit=s required")
            for f in schema.fields:
                parts = [f"  field {f.name} {f.kind}"]
                if f.unit:
                    parts.append(f"unit={f.unit}")
                if f.enum_values:
                    parts.append("values=" + ",".join(f.enum_values))
                parts.append("optional" if f.optional else "required")
                lines.append(" ".join(parts))
            version += 1
    return "\n".join(lines) + "\n"
