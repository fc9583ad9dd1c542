"""Recruitment modes, tokens, sources, withdrawal, and journal replay."""

from __future__ import annotations

import random

import pytest

from cohortkit.errors import (
    DuplicateProject,
    DuplicateSource,
    EnrollmentClosed,
    SchemaError,
    TokenExpired,
    TokenUnknown,
    TokenUsed,
    UnknownUser,
)
from cohortkit.registry import Project, StudyRegistry

from conftest import FIXED_NOW, FakeClock


def test_stream_mode_needs_target_or_deadline():
    Project("p", "stream", target_size=10).validate()
    Project("p", "stream", enrollment_deadline=1.0).validate()
    with pytest.raises(SchemaError):
        Project("p", "stream").validate()


def test_simultaneous_needs_study_start():
    with pytest.raises(SchemaError):
        Project("p", "simultaneous").validate()


def test_duplicate_project(registry, stream_project):
    with pytest.raises(DuplicateProject):
        registry.create_project(Project("p1", "stream", target_size=1))


def test_stream_enrollment_until_target(registry, clock):
    registry.create_project(Project("p2", "stream", target_size=2))
    for _ in range(2):
        token = registry.generate_enrollment_token("p2", 3600)
        registry.redeem_token(token.token, 0)
    with pytest.raises(EnrollmentClosed):
        registry.generate_enrollment_token("p2", 3600)


def test_stream_deadline(registry, clock):
    registry.create_project(Project("p3", "stream", enrollment_deadline=clock.now + 100))
    registry.generate_enrollment_token("p3", 3600)
    clock.advance(200)
    with pytest.raises(EnrollmentClosed):
        registry.generate_enrollment_token("p3", 3600)


def test_simultaneous_closes_at_study_start(registry, clock):
    registry.create_project(Project("p4", "simultaneous", study_start=clock.now + 50))
    registry.generate_enrollment_token("p4", 3600)
    clock.advance(100)
    with pytest.raises(EnrollmentClosed):
        registry.generate_enrollment_token("p4", 3600)


def test_batch_mode_cohorts(registry, clock):
    registry.create_project(
        Project("p5", "batch", cohort_starts={"site-a": clock.now + 100, "site-b": clock.now + 5000})
    )
    registry.generate_enrollment_token("p5", 3600, cohort="site-a")
    with pytest.raises(EnrollmentClosed):
        registry.generate_enrollment_token("p5", 3600)  # cohort required
    clock.advance(200)
    with pytest.raises(EnrollmentClosed):
        registry.generate_enrollment_token("p5", 3600, cohort="site-a")
    token = registry.generate_enrollment_token("p5", 3600, cohort="site-b")
    result = registry.redeem_token(token.token, -60)
    assert registry.get_participant(result["userId"]).cohort == "site-b"


def test_token_single_use_and_expiry(registry, stream_project, clock):
    token = registry.generate_enrollment_token("p1", ttl_seconds=100)
    result = registry.redeem_token(token.token, 60)
    assert result["userId"] == "u0001"
    with pytest.raises(TokenUsed):
        registry.redeem_token(token.token, 60)
    expired = registry.generate_enrollment_token("p1", ttl_seconds=10)
    clock.advance(50)
    with pytest.raises(TokenExpired):
        registry.redeem_token(expired.token, 0)
    with pytest.raises(TokenUnknown):
        registry.redeem_token("enr_nope", 0)


def test_redeem_increments_enrollment_by_one(registry, stream_project):
    before = len(registry.list_participants("p1"))
    token = registry.generate_enrollment_token("p1", 3600)
    registry.redeem_token(token.token, 0)
    assert len(registry.list_participants("p1")) == before + 1


def test_tz_offset_range_enforced(registry, stream_project):
    token = registry.generate_enrollment_token("p1", 3600)
    with pytest.raises(SchemaError):
        registry.redeem_token(token.token, 2000)


def test_sources(registry, stream_project):
    token = registry.generate_enrollment_token("p1", 3600)
    user = registry.redeem_token(token.token, 0)["userId"]
    phone = registry.register_source(user, "phone")
    wearable = registry.register_source(user, "wearable")
    assert phone.source_id != wearable.source_id
    registry.register_source(user, "vendor")
    with pytest.raises(DuplicateSource):
        registry.register_source(user, "vendor")
    # two phones are fine
    registry.register_source(user, "phone")
    with pytest.raises(UnknownUser):
        registry.register_source("u9999", "phone")


def test_withdraw_revokes_access(registry, stream_project):
    token = registry.generate_enrollment_token("p1", 3600)
    result = registry.redeem_token(token.token, 0)
    registry.register_source(result["userId"], "phone")
    assert registry.authenticate(result["accessToken"]).user_id == result["userId"]
    registry.withdraw(result["userId"])
    with pytest.raises(TokenUnknown):
        registry.authenticate(result["accessToken"])
    assert registry.get_participant(result["userId"]).status == "withdrawn"


def test_access_token_expiry(tmp_path, clock):
    registry = StudyRegistry(tmp_path / "d", clock=clock, fsync=False, access_ttl_seconds=100)
    registry.create_project(Project("p1", "stream", target_size=5))
    token = registry.generate_enrollment_token("p1", 3600)
    access = registry.redeem_token(token.token, 0)["accessToken"]
    registry.authenticate(access)
    clock.advance(200)
    with pytest.raises(TokenExpired):
        registry.authenticate(access)


def test_allowed_sources_follow_registration(registry, stream_project):
    token = registry.generate_enrollment_token("p1", 3600)
    result = registry.redeem_token(token.token, 0)
    assert registry.authenticate(result["accessToken"]).allowed_sources == []
    source = registry.register_source(result["userId"], "phone")
    assert source.source_id in registry.authenticate(result["accessToken"]).allowed_sources


def _random_ops(registry, rng, steps=60):
    users = []
    tokens = []
    for step in range(steps):
        op = rng.random()
        try:
            if op < 0.15:
                registry.create_project(
                    Project(f"pr{step}", "stream", target_size=rng.randint(1, 5))
                )
            elif op < 0.4:
                project_ids = list(registry.projects)
                if project_ids:
                    tokens.append(
                        registry.generate_enrollment_token(rng.choice(project_ids), 3600)
                    )
            elif op < 0.7 and tokens:
                token = tokens.pop(rng.randrange(len(tokens)))
                users.append(registry.redeem_token(token.token, rng.choice([-300, 0, 60]))["userId"])
            elif op < 0.9 and users:
                registry.register_source(rng.choice(users), rng.choice(["phone", "wearable"]))
            elif users:
                user = rng.choice(users)
                registry.withdraw(user)
                users.remove(user)
        except EnrollmentClosed:
            pass
        except UnknownUser:
            pass


@pytest.mark.parametrize("seed", [7, 21, 99])
def test_journal_replay_matches_live_state(tmp_path, seed):
    clock = FakeClock(FIXED_NOW)
    registry = StudyRegistry(tmp_path / "d", clock=clock, fsync=False)
    registry.create_project(Project("p1", "stream", target_size=100))
    _random_ops(registry, random.Random(seed))
    live = registry.state_fingerprint()
    replayed = StudyRegistry(tmp_path / "d", clock=clock, fsync=False)
    assert replayed.state_fingerprint() == live


def test_torn_journal_tail_ignored(tmp_path, clock):
    registry = StudyRegistry(tmp_path / "d", clock=clock, fsync=False)
    registry.create_project(Project("p1", "stream", target_size=5))
    token = registry.generate_enrollment_token("p1", 3600)
    registry.redeem_token(token.token, 0)
    journal = tmp_path / "d" / "registry" / "journal.dat"
    with open(journal, "a", encoding="utf-8") as fh:
        fh.write('{"seq": 99, "kind": "enroll_to')  # crash mid-write
    reopened = StudyRegistry(tmp_path / "d", clock=clock, fsync=False)
    assert "u0001" in reopened.participants
    # the torn line is gone from state and new events append cleanly
    reopened.create_project(Project("p2", "stream", target_size=5))
    assert "p2" in StudyRegistry(tmp_path / "d", clock=clock, fsync=False).projects
