"""Append-only log: dense offsets, atomic batches, commits, crash recovery."""

from __future__ import annotations

import os
import random
import struct
import threading

import pytest

from cohortkit import recordio
from cohortkit.errors import (
    OffsetBeyondEnd,
    RecordValidationError,
    TopicExists,
    UnknownSchema,
    UnknownTopic,
)
from cohortkit.streamlog import LogStore

from conftest import light_records, make_record


def test_create_topic(store):
    assert store.latest_offset("phone_light") == 0
    with pytest.raises(TopicExists):
        store.create_topic("phone_light", ("phone_light", 1))
    with pytest.raises(UnknownSchema):
        store.create_topic("fresh_topic", ("nope", 1))


def test_append_dense_offsets(store):
    assert store.append("phone_light", light_records(3)) == (0, 2)
    assert store.append("phone_light", light_records(2)) == (3, 4)
    assert store.append("phone_light", light_records(3)) == (5, 7)


def test_append_rejects_whole_batch(store):
    batch = light_records(3)
    batch[1] = make_record("phone_light", 5.0, {"lux": "bad"})
    with pytest.raises(RecordValidationError) as err:
        store.append("phone_light", batch)
    assert store.latest_offset("phone_light") == 0
    assert err.value.violations


def test_read_window(store):
    store.append("phone_light", light_records(5))
    chunk = store.read("phone_light", 1, 2)
    assert [offset for offset, _ in chunk] == [1, 2]
    assert [r.payload["lux"] for _, r in chunk] == [1.0, 2.0]
    assert store.read("phone_light", 5, 10) == []
    with pytest.raises(UnknownTopic):
        store.read("nope", 0, 1)


def test_restart_preserves_bytes(tmp_path, schema_registry):
    store = LogStore(tmp_path / "d", schema_registry, fsync=False)
    store.create_catalog_topics()
    store.append("phone_light", light_records(7))
    schema = store.schema_for("phone_light")
    before = [recordio.record_to_line(r, schema) for _, r in store.read_all("phone_light")]
    store.close()
    reopened = LogStore(tmp_path / "d", schema_registry, fsync=False)
    after = [recordio.record_to_line(r, schema) for _, r in reopened.read_all("phone_light")]
    assert after == before
    assert reopened.latest_offset("phone_light") == 7
    reopened.close()


def test_commits(store):
    store.append("phone_light", light_records(6))
    store.commit("g1", "phone_light", 5)
    store.commit("g1", "phone_light", 3)
    assert store.committed("g1", "phone_light") == 5
    assert store.committed("fresh", "phone_light") == 0
    with pytest.raises(OffsetBeyondEnd):
        store.commit("g1", "phone_light", 7)


def test_commits_survive_restart(tmp_path, schema_registry):
    store = LogStore(tmp_path / "d", schema_registry, fsync=False)
    store.create_catalog_topics()
    store.append("phone_light", light_records(4))
    store.commit("g1", "phone_light", 4)
    store.close()
    reopened = LogStore(tmp_path / "d", schema_registry, fsync=False)
    assert reopened.committed("g1", "phone_light") == 4
    reopened.close()


def test_torn_tail_frame_discarded(tmp_path, schema_registry):
    store = LogStore(tmp_path / "d", schema_registry, fsync=False)
    store.create_catalog_topics()
    store.append("phone_light", light_records(4))
    store.close()
    seg = tmp_path / "d" / "log" / "phone_light" / "segment-0.dat"
    with open(seg, "ab") as fh:  # simulate a crash mid-frame: header + partial payload
        fh.write(struct.pack(">III", 500, 12345, 3) + b"partial bytes only")
    reopened = LogStore(tmp_path / "d", schema_registry, fsync=False)
    assert reopened.latest_offset("phone_light") == 4
    assert reopened.append("phone_light", light_records(1)) == (4, 4)
    assert len(list(reopened.read_all("phone_light"))) == 5
    reopened.close()


def test_corrupt_crc_truncates(tmp_path, schema_registry):
    store = LogStore(tmp_path / "d", schema_registry, fsync=False)
    store.create_catalog_topics()
    store.append("phone_light", light_records(2))
    store.append("phone_light", light_records(2))
    store.close()
    seg = tmp_path / "d" / "log" / "phone_light" / "segment-0.dat"
    data = bytearray(seg.read_bytes())
    data[-1] ^= 0xFF  # flip one payload byte of the final frame
    seg.write_bytes(bytes(data))
    reopened = LogStore(tmp_path / "d", schema_registry, fsync=False)
    assert reopened.latest_offset("phone_light") == 2
    reopened.close()


def test_segment_rollover(tmp_path, schema_registry):
    store = LogStore(tmp_path / "d", schema_registry, fsync=False, max_segment_bytes=2000)
    store.create_catalog_topics()
    for _ in range(8):
        store.append("phone_light", light_records(10))
    segments = list((tmp_path / "d" / "log" / "phone_light").glob("segment-*.dat"))
    assert len(segments) > 1
    assert [o for o, _ in store.read_all("phone_light")] == list(range(80))
    store.close()
    reopened = LogStore(tmp_path / "d", schema_registry, fsync=False, max_segment_bytes=2000)
    assert reopened.latest_offset("phone_light") == 80
    assert [o for o, _ in reopened.read_all("phone_light")] == list(range(80))
    reopened.close()


def test_concurrent_appends_are_batch_contiguous(store):
    batches_per_thread = 20

    def writer(tag):
        for i in range(batches_per_thread):
            records = [
                make_record("phone_light", i, {"lux": float(tag)}, user=f"u{tag:04d}")
                for _ in range(3)
            ]
            store.append("phone_light", records)

    threads = [threading.Thread(target=writer, args=(tag,)) for tag in range(1, 6)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    rows = list(store.read_all("phone_light"))
    assert [o for o, _ in rows] == list(range(5 * batches_per_thread * 3))
    # every batch of three landed contiguously
    for i in range(0, len(rows), 3):
        trio = {r.key.user_id for _, r in rows[i : i + 3]}
        assert len(trio) == 1


def test_reads_see_consistent_prefix_during_appends(store):
    stop = threading.Event()
    errors = []

    def reader():
        while not stop.is_set():
            end = store.latest_offset("phone_light")
            rows = store.read("phone_light", 0, max(1, end))
            offsets = [o for o, _ in rows]
            if offsets != list(range(len(offsets))):
                errors.append(offsets)
                return

    t = threading.Thread(target=reader)
    t.start()
    for i in range(50):
        store.append("phone_light", light_records(5))
    stop.set()
    t.join()
    assert not errors


def test_kill_restart_randomized(tmp_path, schema_registry):
    """Random interleaving of appends, torn writes, and reopens: offsets stay dense."""
    rng = random.Random(1234)
    path = tmp_path / "d"
    store = LogStore(path, schema_registry, fsync=False)
    store.create_catalog_topics()
    durable = 0
    for _ in range(60):
        n = rng.randint(1, 6)
        store.append("phone_light", light_records(n))
        durable += n
        action = rng.random()
        if action < 0.3:
            store.close()
            if rng.random() < 0.5:  # crash mid-frame on the way down
                seg_dir = path / "log" / "phone_light"
                segs = sorted(seg_dir.glob("segment-*.dat"), key=lambda p: int(p.stem.split("-")[1]))
                with open(segs[-1], "ab") as fh:
                    fh.write(os.urandom(rng.randint(1, 40)))
            store = LogStore(path, schema_registry, fsync=False)
            rows = list(store.read_all("phone_light"))
            assert [o for o, _ in rows] == list(range(durable))
    store.close()
