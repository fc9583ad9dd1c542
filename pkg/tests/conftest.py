"""Shared fixtures: catalog-backed stores, fixed-clock registries, record builders."""

from __future__ import annotations

import pytest

from cohortkit.model import ObservationKey, SchemaRegistry, SensorRecord, install_catalog
from cohortkit.registry import Project, StudyRegistry
from cohortkit.streamlog import LogStore

FIXED_NOW = 1_700_000_000.0


class FakeClock:
    def __init__(self, now=FIXED_NOW):
        self.now = now

    def __call__(self):
        return self.now

    def advance(self, seconds):
        self.now += seconds


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def schema_registry():
    reg = SchemaRegistry()
    install_catalog(reg)
    return reg


@pytest.fixture
def store(tmp_path, schema_registry):
    s = LogStore(tmp_path / "data", schema_registry, fsync=False)
    s.create_catalog_topics()
    yield s
    s.close()


@pytest.fixture
def registry(tmp_path, clock):
    reg = StudyRegistry(tmp_path / "data", clock=clock, fsync=False)
    return reg


@pytest.fixture
def stream_project(registry):
    registry.create_project(Project(project_id="p1", recruitment_mode="stream", target_size=50))
    return registry.get_project("p1")


def make_record(topic, time, payload, user="u0001", source="u0001-phone-1", project="p1",
                time_received=None):
    return SensorRecord(
        key=ObservationKey(project, user, source),
        topic=topic,
        schema_version=1,
        time=float(time),
        time_received=float(time_received if time_received is not None else time + 1.0),
        payload=payload,
    )


def light_records(n, t0=FIXED_NOW - 10_000.0, **kw):
    return [make_record("phone_light", t0 + i, {"lux": float(i)}, **kw) for i in range(n)]
