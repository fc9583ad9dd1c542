"""Durable single-node append-only topic log with dense offsets and consumer commits.

On-disk layout (documented in docs/storage-format.md):

    <dataDir>/log/<topic>/meta.json        topic -> (schema name, version)
    <dataDir>/log/<topic>/segment-<n>.dat  batch frames, see below
    <dataDir>/log/commits.dat              consumer-group commit journal

Each segment starts with a magic header; after it, every append is one frame:
``u32 payload-length | u32 crc32(count+payload) | u32 record-count | payload``
where the payload is the batch's records in the serialized line format. A
frame is the atomicity unit: recovery truncates any torn or corrupt tail, so
a batch is either fully durable or absent, and offsets never have gaps.
"""

from __future__ import annotations

import json
import os
import struct
import threading
import zlib
from bisect import bisect_right
from dataclasses import dataclass
from pathlib import Path

from . import recordio
from .errors import (
    OffsetBeyondEnd,
    RecordValidationError,
    StorageError,
    TopicExists,
    UnknownSchema,
    UnknownTopic,
)
from .model import KEY_PATTERN, SchemaRegistry, SensorRecord

SEGMENT_MAGIC = b"CKLG"
SEGMENT_FORMAT_VERSION = 1
_SEG_HEADER = struct.Struct(">4sHQ")  # magic, format version, first offset
_FRAME_HEADER = struct.Struct(">III")  # payload length, crc32, record count

DEFAULT_SEGMENT_BYTES = 64 * 1024 * 1024


class PersistentSchemaRegistry(SchemaRegistry):
    """Schema registry mirrored to <dataDir>/schemas.json so restarts can re-validate."""

    def __init__(self, path: Path):
        super().__init__()
        self._path = Path(path)
        if self._path.exists():
            self._load()

    def _load(self):
        data = json.loads(self._path.read_text("utf-8"))
        from .model import FieldSpec, TopicSchema

        for name in sorted(data):
            for raw in data[name]:
                fields = tuple(
                    FieldSpec(
                        f["name"],
                        f["kind"],
                        f.get("unit", ""),
                        tuple(f["enum_values"]) if f.get("enum_values") else None,
                        f.get("optional", False),
                    )
                    for f in raw["fields"]
                )
                super().register(name, fields)

    def _dump(self):
        data = {}
        for name in self.names():
            entries = []
            version = 1
            while self.has(name, version):
                schema = self.get(name, version)
                entries.append(
                    {
                        "version": schema.version,
                        "fields": [
                            {
                                "name": f.name,
                                "kind": f.kind,
                                "unit": f.unit,
                                "enum_values": list(f.enum_values) if f.enum_values else None,
                                "optional": f.optional,
                            }
                            for f in schema.fields
                        ],
                    }
                )
                version += 1
            data[name] = entries
        tmp = self._path.with_suffix(".tmp")
        tmp.write_text(json.dumps(data, indent=1, sort_keys=True), "utf-8")
        os.replace(tmp, self._path)

    def register(self, name, fields) -> int:
        had = self.has(name)
        before = len(self._by_name.get(name, [])) if had else 0
        version = super().register(name, fields)
        if version > before:
            self._path.parent.mkdir(parents=True, exist_ok=True)
            self._dump()
        return version


@dataclass
class _Frame:
    first_offset: int
    count: int
    segment: int
    payload_pos: int
    payload_len: int


class _TopicLog:
    def __init__(self, store: "LogStore", name: str, path: Path):
        self.store = store
        self.name = name
        self.path = path
        self.lock = threading.Lock()
        meta = json.loads((path / "meta.json").read_text("utf-8"))
        self.schema_name = meta["schema"]
        self.schema_version = meta["version"]
        self.frames: list[_Frame] = []
        self.frame_starts: list[int] = []  # first offset per frame, for bisect
        self.next_offset = 0
        self._write_fd: int | None = None
        self._read_fds: dict[int, int] = {}
        self._read_fds_lock = threading.Lock()
        self._recover()

    # -- segment files -----------------------------------------------------

    def _segment_path(self, index: int) -> Path:
        return self.path / f"segment-{index}.dat"

    def _segment_indices(self) -> list[int]:
        out = []
        for p in self.path.glob("segment-*.dat"):
            try:
                out.append(int(p.stem.split("-")[1]))
            except (IndexError, ValueError):
                continue
        return sorted(out)

    def _read_fd(self, index: int) -> int:
        with self._read_fds_lock:
            fd = self._read_fds.get(index)
            if fd is None:
                fd = os.open(self._segment_path(index), os.O_RDONLY)
                self._read_fds[index] = fd
            return fd

    def _recover(self):
        indices = self._segment_indices()
        offset = 0
        rewrite_header_for: int | None = None
        for seg in indices:
            spath = self._segment_path(seg)
            with open(spath, "rb") as fh:
                header = fh.read(_SEG_HEADER.size)
                if len(header) < _SEG_HEADER.size:
                    # torn during segment creation: recreate the header in place
                    self._truncate(spath, 0)
                    rewrite_header_for = seg
                    break
                magic, fmt, first = _SEG_HEADER.unpack(header)
                if magic != SEGMENT_MAGIC or fmt != SEGMENT_FORMAT_VERSION:
                    raise StorageError(f"bad segment header in {spath}")
                if first != offset:
                    raise StorageError(
                        f"segment {spath} starts at offset {first}, expected {offset}"
                    )
                pos = _SEG_HEADER.size
                while True:
                    head = fh.read(_FRAME_HEADER.size)
                    if len(head) < _FRAME_HEADER.size:
                        if head:
                            self._truncate(spath, pos)
                        break
                    length, crc, count = _FRAME_HEADER.unpack(head)
                    payload = fh.read(length)
                    if len(payload) < length or zlib.crc32(head[8:12] + payload) != crc:
                        self._truncate(spath, pos)
                        break
                    frame = _Frame(offset, count, seg, pos + _FRAME_HEADER.size, length)
                    self.frames.append(frame)
                    self.frame_starts.append(offset)
                    offset += count
                    pos += _FRAME_HEADER.size + length
        self.next_offset = offset
        if not indices:
            self._start_segment(0, 0)
        elif rewrite_header_for is not None:
            fd = os.open(self._segment_path(rewrite_header_for), os.O_WRONLY | os.O_APPEND)
            os.write(fd, _SEG_HEADER.pack(SEGMENT_MAGIC, SEGMENT_FORMAT_VERSION, offset))
            if self.store.fsync:
                os.fsync(fd)
            self._open_segment = rewrite_header_for
            self._write_fd = fd
        else:
            self._open_segment = indices[-1]
            self._write_fd = os.open(
                self._segment_path(self._open_segment), os.O_WRONLY | os.O_APPEND
            )

    @staticmethod
    def _truncate(path: Path, size: int):
        with open(path, "r+b") as fh:
            fh.truncate(size)

    def _start_segment(self, index: int, first_offset: int):
        spath = self._segment_path(index)
        fd = os.open(spath, os.O_WRONLY | os.O_CREAT | os.O_EXCL)
        os.write(fd, _SEG_HEADER.pack(SEGMENT_MAGIC, SEGMENT_FORMAT_VERSION, first_offset))
        if self.store.fsync:
            os.fsync(fd)
        self._open_segment = index
        self._write_fd = fd

    # -- public operations ---------------------------------------------------

    def append(self, records: list[SensorRecord]) -> tuple[int, int]:
        if not records:
            raise RecordValidationError("empty batch")
        registry = self.store.registry
        schema = registry.get(self.schema_name, self.schema_version)
        violations = []
        normalized = []
        for i, record in enumerate(records):
            if record.topic != self.name:
                violations.append((i, [("topic", "wrong_topic", record.topic)]))
                continue
            wire = recordio.wire_payload(record)
            bad = registry.validate(self.schema_name, record.schema_version, wire)
            if bad:
                violations.append((i, [(v.field, v.reason, v.detail) for v in bad]))
                continue
            payload = registry.normalize(self.schema_name, record.schema_version, wire)
            normalized.append(
                SensorRecord(
                    record.key,
                    record.topic,
                    record.schema_version,
                    float(record.time),
                    float(record.time_received),
                    payload,
                )
            )
        if violations:
            raise RecordValidationError(
                f"{len(violations)} invalid record(s) in batch", violations
            )
        lines = [recordio.record_to_line(r, schema) for r in normalized]
        payload_bytes = "".join(lines).encode("utf-8")
        count_bytes = struct.pack(">I", len(normalized))
        crc = zlib.crc32(count_bytes + payload_bytes)
        frame_bytes = (
            _FRAME_HEADER.pack(len(payload_bytes), crc, len(normalized)) + payload_bytes
        )
        with self.lock:
            pos = os.lseek(self._write_fd, 0, os.SEEK_END)
            if pos > self.store.max_segment_bytes:
                os.close(self._write_fd)
                self._start_segment(self._open_segment + 1, self.next_offset)
                pos = _SEG_HEADER.size
            os.write(self._write_fd, frame_bytes)
            if self.store.fsync:
                os.fsync(self._write_fd)
            first = self.next_offset
            frame = _Frame(
                first,
                len(normalized),
                self._open_segment,
                pos + _FRAME_HEADER.size,
                len(payload_bytes),
            )
            self.frames.append(frame)
            self.frame_starts.append(first)
            self.next_offset = first + len(normalized)
            return first, self.next_offset - 1

    def read(self, from_offset: int, max_records: int) -> list[tuple[int, SensorRecord]]:
        if from_offset < 0 or max_records < 1:
            raise ValueError("from_offset must be >= 0 and max_records >= 1")
        with self.lock:
            end = self.next_offset
            n_frames = len(self.frames)
        if from_offset >= end:
            return []
        stop = min(from_offset + max_records, end)
        out = []
        idx = bisect_right(self.frame_starts, from_offset, 0, n_frames) - 1
        registry = self.store.registry
        while idx < n_frames and len(out) < stop - from_offset:
            frame = self.frames[idx]
            if frame.first_offset >= stop:
                break
            data = os.pread(self._read_fd(frame.segment), frame.payload_len, frame.payload_pos)
            text = data.decode("utf-8")
            records = recordio.parse_records(text, self.name, registry, header=False)
            for j, record in enumerate(records):
                offset = frame.first_offset + j
                if from_offset <= offset < stop:
                    out.append((offset, record))
            idx += 1
        return out

    def close(self):
        with self.lock:
            if self._write_fd is not None:
                os.close(self._write_fd)
                self._write_fd = None
            for fd in self._read_fds.values():
                os.close(fd)
            self._read_fds.clear()


class LogStore:
    """All topics under one data directory, plus consumer-group commits."""

    def __init__(
        self,
        data_dir,
        registry: SchemaRegistry | None = None,
        fsync: bool = True,
        max_segment_bytes: int = DEFAULT_SEGMENT_BYTES,
    ):
        self.root = Path(data_dir) / "log"
        self.root.mkdir(parents=True, exist_ok=True)
        if registry is None:
            registry = PersistentSchemaRegistry(Path(data_dir) / "schemas.json")
        self.registry = registry
        self.fsync = fsync
        self.max_segment_bytes = max_segment_bytes
        self._topics: dict[str, _TopicLog] = {}
        self._topics_lock = threading.Lock()
        self._commits: dict[tuple[str, str], int] = {}
        self._commits_lock = threading.Lock()
        self._commits_path = self.root / "commits.dat"
        self._load_topics()
        self._load_commits()

    def _load_topics(self):
        for child in sorted(self.root.iterdir()):
            if child.is_dir() and (child / "meta.json").exists():
                self._topics[child.name] = _TopicLog(self, child.name, child)

    # -- topics ---------------------------------------------------------------

    def create_topic(self, name: str, schema_ref: tuple[str, int]) -> None:
        if not KEY_PATTERN.match(name):
            raise UnknownTopic(f"bad topic name {name!r}")
        schema_name, version = schema_ref
        if not self.registry.has(schema_name, version):
            raise UnknownSchema(f"no schema {schema_name!r} v{version}")
        with self._topics_lock:
            if name in self._topics:
                raise TopicExists(name)
            path = self.root / name
            path.mkdir(parents=True, exist_ok=True)
            (path / "meta.json").write_text(
                json.dumps({"schema": schema_name, "version": version}), "utf-8"
            )
            self._topics[name] = _TopicLog(self, name, path)

    def create_catalog_topics(self):
        """Create a topic per registered catalog schema, skipping existing ones."""
        from .model import install_catalog

        for name in install_catalog(self.registry):
            if name not in self._topics:
                self.create_topic(name, (name, 1))

    def topics(self) -> list[str]:
        with self._topics_lock:
            return sorted(self._topics)

    def has_topic(self, name: str) -> bool:
        with self._topics_lock:
            return name in self._topics

    def _topic(self, name: str) -> _TopicLog:
        with self._topics_lock:
            topic = self._topics.get(name)
        if topic is None:
            raise UnknownTopic(name)
        return topic

    def schema_for(self, name: str):
        t = self._topic(name)
        return self.registry.get(t.schema_name, t.schema_version)

    # -- records ----------------------------------------------------------------

    def append(self, topic: str, records: list[SensorRecord]) -> tuple[int, int]:
        return self._topic(topic).append(records)

    def read(self, topic: str, from_offset: int, max_records: int):
        return self._topic(topic).read(from_offset, max_records)

    def read_all(self, topic: str, batch: int = 5000):
        """Yield (offset, record) over the whole topic in offset order."""
        offset = 0
        while True:
            chunk = self.read(topic, offset, batch)
            if not chunk:
                return
            yield from chunk
            offset = chunk[-1][0] + 1

    def latest_offset(self, topic: str) -> int:
        return self._topic(topic).next_offset

    # -- consumer commits ---------------------------------------------------------

    def _load_commits(self):
        if not self._commits_path.exists():
            return
        raw = self._commits_path.read_bytes()
        good_bytes = 0
        torn = False
        for line in raw.split(b"\n"):
            if not line:
                continue
            parts = line.decode("utf-8", "replace").split(" ")
            if len(parts) != 3 or not parts[2].isdigit():
                torn = True  # crash mid-write; later appends must stay line-aligned
                break
            group, topic, value = parts[0], parts[1], int(parts[2])
            key = (group, topic)
            if value > self._commits.get(key, 0):
                self._commits[key] = value
            good_bytes += len(line) + 1
        if torn:
            with open(self._commits_path, "r+b") as fh:
                fh.truncate(good_bytes)

    def commit(self, group: str, topic: str, offset: int) -> None:
        if not KEY_PATTERN.match(group):
            raise StorageError(f"bad group id {group!r}")
        end = self._topic(topic).next_offset
        if offset > end:
            raise OffsetBeyondEnd(f"commit {offset} beyond end {end} for {topic!r}")
        with self._commits_lock:
            key = (group, topic)
            if offset <= self._commits.get(key, 0):
                return
            self._commits[key] = offset
            with open(self._commits_path, "a", encoding="utf-8") as fh:
                fh.write(f"{group} {topic} {offset}\n")
                fh.flush()
                if self.fsync:
                    os.fsync(fh.fileno())

    def committed(self, group: str, topic: str) -> int:
        self._topic(topic)  # unknown topic is an error even for fresh groups
        with self._commits_lock:
            return self._commits.get((group, topic), 0)

    def close(self):
        with self._topics_lock:
            for topic in self._topics.values():
                topic.close()
