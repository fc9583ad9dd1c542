"""Single executable exposing every capability for scripted end-to-end runs.

Registry commands operate directly on the data directory (no server needed);
``serve`` runs the gateway, admin API, and optionally the mock vendor until
signaled. Exit codes: 0 success, 1 runtime failure, 2 usage or validation
error. ``--json`` switches registry-ish commands to machine-readable output.
"""

from __future__ import annotations

import datetime as _dt
import json
import signal
import sys
import threading
from dataclasses import asdict
from pathlib import Path

import click
import requests

from . import recordio
from .adminapi import admin_routes
from .collector import VendorClientConfig, VendorCollector
from .config import Config, load_config
from .errors import CohortkitError, ProtocolError
from .features.pipeline import (
    MODALITY_TOPICS,
    collect_user_streams,
    compute_user_features,
    write_matrix,
    write_provenance,
)
from .gateway import IngestionGateway
from .httpkit import JsonService
from .mockvendor import MockVendor
from .questionnaire import parse_protocol
from .registry import Project, StudyRegistry
from .reporting import (
    completion_report,
    contiguity_matrix,
    export_raw,
    write_completion_csv,
    write_contiguity_csv,
)
from .streamlog import LogStore
from .timeutil import date_range, parse_date


class _Ctx:
    def __init__(self, config: Config, as_json: bool):
        self.config = config
        self.as_json = as_json
        self._store = None
        self._registry = None

    @property
    def store(self) -> LogStore:
        if self._store is None:
            self._store = LogStore(self.config.data_dir, fsync=self.config.fsync)
            self._store.create_catalog_topics()
        return self._store

    @property
    def registry(self) -> StudyRegistry:
        if self._registry is None:
            self._registry = StudyRegistry(
                self.config.data_dir,
                clock=self.config.clock(),
                fsync=self.config.fsync,
                access_ttl_seconds=self.config.access_ttl_seconds,
            )
        return self._registry

    def vendor_config(self) -> VendorClientConfig:
        base = f"http://{self.config.vendor_bind_addr}"
        return VendorClientConfig(
            client_id=self.config.vendor_client_id,
            client_secret=self.config.vendor_client_secret,
            authorize_url=self.config.vendor_authorize_url or f"{base}/oauth2/authorize",
            token_url=self.config.vendor_token_url or f"{base}/oauth2/token",
            api_base=self.config.vendor_api_base or base,
            scopes=tuple(self.config.vendor_scopes.split()),
        )

    def emit(self, data: dict, human: str | None = None):
        if self.as_json:
            click.echo(json.dumps(data, sort_keys=True))
        else:
            click.echo(human if human is not None else json.dumps(data, sort_keys=True))


def _fail(e: Exception) -> "click.exceptions.Exit":
    click.echo(f"error: {e}", err=True)
    return click.exceptions.Exit(1)


@click.group()
@click.option("--config", "config_path", type=click.Path(exists=True), default=None)
@click.option("--data-dir", default=None, help="overrides config/env data directory")
@click.option("--now", type=float, default=None, help="fixed clock for registry commands")
@click.option("--json", "as_json", is_flag=True, default=False)
@click.pass_context
def main(ctx, config_path, data_dir, now, as_json):
    cfg = load_config(config_path)
    if data_dir:
        cfg.data_dir = data_dir
    if now is not None:
        cfg.fixed_time = now
    cfg.resolve()
    ctx.obj = _Ctx(cfg, as_json)


# -- project / enrollment ----------------------------------------------------


@main.group()
def project():
    """Create and inspect projects."""


@project.command("create")
@click.option("--id", "project_id", required=True)
@click.option("--mode", type=click.Choice(["simultaneous", "batch", "stream"]), required=True)
@click.option("--protocol-id", default="")
@click.option("--target-size", type=int, default=None)
@click.option("--deadline", type=float, default=None, help="enrollment deadline, epoch seconds")
@click.option("--study-start", type=float, default=None, help="epoch seconds")
@click.option("--cohort", "cohorts", multiple=True, help="label=startEpoch (batch mode)")
@click.pass_obj
def project_create(ctx, project_id, mode, protocol_id, target_size, deadline, study_start, cohorts):
    starts = {}
    for item in cohorts:
        label, _, epoch = item.partition("=")
        starts[label] = float(epoch)
    try:
        ctx.registry.create_project(
            Project(
                project_id=project_id,
                recruitment_mode=mode,
                protocol_id=protocol_id,
                target_size=target_size,
                enrollment_deadline=deadline,
                study_start=study_start,
                cohort_starts=starts,
            )
        )
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"ok": True, "projectId": project_id}, f"created project {project_id}")


@project.command("list")
@click.pass_obj
def project_list(ctx):
    projects = [asdict(p) for _, p in sorted(ctx.registry.projects.items())]
    ctx.emit(
        {"projects": projects},
        "\n".join(f"{p['project_id']}  mode={p['recruitment_mode']}" for p in projects) or "(none)",
    )


@main.group()
def token():
    """Enrollment tokens."""


@token.command("new")
@click.option("--project", "project_id", required=True)
@click.option("--ttl", type=float, default=86400.0)
@click.option("--cohort", default=None)
@click.pass_obj
def token_new(ctx, project_id, ttl, cohort):
    try:
        tok = ctx.registry.generate_enrollment_token(project_id, ttl, cohort)
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"token": tok.token, "expiresAt": tok.expires_at}, tok.token)


@main.command("enroll")
@click.option("--token", "token_value", required=True)
@click.option("--tz", "tz_offset", type=int, default=0, help="timezone offset minutes")
@click.pass_obj
def enroll(ctx, token_value, tz_offset):
    try:
        result = ctx.registry.redeem_token(token_value, tz_offset)
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit(result, f"{result['userId']} {result['accessToken']}")


@main.group()
def source():
    """Data sources attached to participants."""


@source.command("add")
@click.option("--user", "user_id", required=True)
@click.option("--type", "source_type", type=click.Choice(["phone", "wearable", "vendor"]), required=True)
@click.pass_obj
def source_add(ctx, user_id, source_type):
    try:
        src = ctx.registry.register_source(user_id, source_type)
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"sourceId": src.source_id}, src.source_id)


@main.command("withdraw")
@click.option("--user", "user_id", required=True)
@click.pass_obj
def withdraw(ctx, user_id):
    try:
        ctx.registry.withdraw(user_id)
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"ok": True}, f"withdrew {user_id}")


@main.command("participants")
@click.option("--project", "project_id", required=True)
@click.pass_obj
def participants(ctx, project_id):
    try:
        rows = [asdict(p) for p in ctx.registry.list_participants(project_id)]
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit(
        {"participants": rows},
        "\n".join(f"{r['user_id']} {r['status']} tz={r['timezone_offset_minutes']}" for r in rows)
        or "(none)",
    )


# -- protocol ------------------------------------------------------------------


@main.group()
def protocol():
    """Questionnaire protocol documents."""


@protocol.command("validate")
@click.argument("file", type=click.Path(exists=True))
@click.pass_obj
def protocol_validate(ctx, file):
    try:
        doc = Path(file).read_text("utf-8")
        parsed = parse_protocol(doc)
    except ProtocolError as e:
        for finding in e.findings or [str(e)]:
            click.echo(f"invalid: {finding}", err=True)
        raise click.exceptions.Exit(2)
    ctx.emit(
        {"ok": True, "entries": len(parsed.entries)},
        f"ok: {len(parsed.entries)} entries",
    )


@protocol.command("store")
@click.option("--id", "protocol_id", required=True)
@click.argument("file", type=click.Path(exists=True))
@click.pass_obj
def protocol_store(ctx, protocol_id, file):
    try:
        ctx.registry.store_protocol(protocol_id, Path(file).read_text("utf-8"))
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"ok": True, "protocolId": protocol_id}, f"stored protocol {protocol_id}")


# -- simulate / ingest ---------------------------------------------------------


@main.command("simulate")
@click.option("--scenario", type=click.Path(exists=True), required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def simulate_cmd(ctx, scenario, out_dir):
    from .simulator import load_scenario, simulate, write_outputs

    try:
        sc = load_scenario(Path(scenario).read_text("utf-8"))
        result = simulate(sc)
        manifest = write_outputs(result, out_dir)
    except CohortkitError as e:
        raise _fail(e)
    total = sum(manifest["streams"].values())
    ctx.emit({"ok": True, "records": total}, f"simulated {total} records into {out_dir}")


@main.command("ingest-file")
@click.option("--topic", required=True)
@click.option("--token", "bearer", required=True)
@click.option("--gateway", "gateway_url", required=True)
@click.option("--batch-size", type=int, default=2000)
@click.argument("file", type=click.Path(exists=True))
@click.pass_obj
def ingest_file(ctx, topic, bearer, gateway_url, batch_size, file):
    """Replay a serialized record file through the gateway."""
    store = ctx.store
    try:
        schema = store.schema_for(topic)
    except CohortkitError as e:
        raise _fail(e)
    text = Path(file).read_text("utf-8")
    records = recordio.parse_records(text, topic, store.registry, header=True)
    session = requests.Session()
    accepted = 0
    rejected = []
    for start in range(0, len(records), batch_size):
        chunk = records[start : start + batch_size]
        wire = []
        for record in chunk:
            body = dict(record.payload)
            body["time"] = record.time
            body["sourceId"] = record.key.source_id
            wire.append(body)
        batch_id = f"{Path(file).name}:{start}"
        response = session.post(
            f"{gateway_url}/v1/ingest/{topic}",
            json={"batchId": batch_id, "records": wire},
            headers={"Authorization": f"Bearer {bearer}"},
            timeout=120,
        )
        if response.status_code != 200:
            raise _fail(CohortkitError(f"gateway returned {response.status_code}: {response.text}"))
        report = response.json()
        accepted += report["accepted"]
        rejected.extend(report["rejected"])
    ctx.emit(
        {"accepted": accepted, "rejected": rejected},
        f"accepted {accepted}, rejected {len(rejected)}",
    )
    if rejected:
        raise click.exceptions.Exit(1)


# -- collector ------------------------------------------------------------------


def _collector(ctx) -> VendorCollector:
    return VendorCollector(
        ctx.vendor_config(),
        ctx.store,
        ctx.registry,
        ctx.config.data_dir,
        clock=ctx.config.clock(),
    )


@main.group()
def collector():
    """OAuth2 vendor collector."""


@collector.command("authorize")
@click.option("--user", "user_id", required=True)
@click.option("--state", default="cli")
@click.pass_obj
def collector_authorize(ctx, user_id, state):
    try:
        pair = _collector(ctx).authorize_user(user_id, state)
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"ok": True, "expiresAt": pair.expires_at}, f"authorized {user_id}")


@collector.command("run")
@click.option("--user", "user_id", default=None, help="default: every participant with a vendor source")
@click.option("--from", "from_date", required=True)
@click.option("--to", "to_date", required=True)
@click.pass_obj
def collector_run(ctx, user_id, from_date, to_date):
    col = _collector(ctx)
    users = [user_id] if user_id else [
        p.user_id
        for p in ctx.registry.participants.values()
        if p.status == "active" and ctx.registry.vendor_source(p.user_id)
    ]
    results = {}
    failed = False
    for uid in sorted(users):
        try:
            summary = col.run_backfill(uid, parse_date(from_date), parse_date(to_date))
        except CohortkitError as e:
            results[uid] = {"error": str(e)}
            failed = True
            continue
        results[uid] = summary.as_json()
        if summary.failures:
            failed = True
    ctx.emit({"results": results}, json.dumps(results, indent=1, sort_keys=True))
    if failed:
        raise click.exceptions.Exit(1)


# -- features / reports / export -------------------------------------------------


@main.command("features")
@click.argument("action", type=click.Choice(["run"]))
@click.option("--project", "project_id", required=True)
@click.option("--from", "from_date", required=True)
@click.option("--to", "to_date", required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def features_cmd(ctx, action, project_id, from_date, to_date, out_dir):
    """Compute the per-(user, day) feature matrix with its provenance sidecar."""
    try:
        users = ctx.registry.list_participants(project_id)
        dates = date_range(parse_date(from_date), parse_date(to_date))
        cfg = ctx.config.feature_config()
        streams = collect_user_streams(ctx.store, [u.user_id for u in users], project_id)
        vectors = []
        for user in users:
            vectors.extend(
                compute_user_features(
                    streams[user.user_id], user.user_id, user.timezone_offset_minutes, dates, cfg
                )
            )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_matrix(vectors, out / "features.csv")
        write_provenance(cfg, out / "provenance.txt")
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit(
        {"ok": True, "rows": len(vectors), "out": str(out / "features.csv")},
        f"wrote {len(vectors)} rows to {out / 'features.csv'}",
    )


@main.group()
def report():
    """Compliance reports (CSV plus SVG)."""


@report.command("contiguity")
@click.option("--user", "user_id", required=True)
@click.option("--from", "from_date", required=True)
@click.option("--to", "to_date", required=True)
@click.option("--modalities", default=None, help="comma-separated topics; default: catalog")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def report_contiguity(ctx, user_id, from_date, to_date, modalities, out_dir):
    from .plotting import render_heatmap

    try:
        participant = ctx.registry.get_participant(user_id)
        dates = date_range(parse_date(from_date), parse_date(to_date))
        topics = modalities.split(",") if modalities else list(MODALITY_TOPICS)
        matrix = contiguity_matrix(
            ctx.store, user_id, participant.timezone_offset_minutes, dates, topics
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_contiguity_csv(matrix, out / f"contiguity_{user_id}.csv")
        (out / f"contiguity_{user_id}.svg").write_bytes(render_heatmap(matrix))
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit({"ok": True, "out": str(out)}, f"wrote contiguity report for {user_id} to {out}")


@report.command("completion")
@click.option("--project", "project_id", required=True)
@click.option("--from", "from_date", required=True)
@click.option("--to", "to_date", required=True)
@click.option("--as-of", "as_of", type=float, default=None, help="epoch seconds; default now")
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def report_completion(ctx, project_id, from_date, to_date, as_of, out_dir):
    from .plotting import render_completion_chart

    try:
        when = as_of if as_of is not None else ctx.config.clock()()
        rep = completion_report(
            ctx.store, ctx.registry, project_id, parse_date(from_date), parse_date(to_date), when
        )
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        write_completion_csv(rep, out / f"completion_{project_id}.csv")
        (out / f"completion_{project_id}.svg").write_bytes(render_completion_chart(rep))
    except CohortkitError as e:
        raise _fail(e)
    mean = "null" if rep.project_mean is None else f"{rep.project_mean:.3f}"
    ctx.emit(
        {"ok": True, "projectMean": rep.project_mean, "out": str(out)},
        f"completion report for {project_id}: mean {mean}",
    )


@main.command("export")
@click.option("--project", "project_id", required=True)
@click.option("--topics", default="all", help="comma-separated; 'all' = every catalog topic")
@click.option("--from", "from_date", required=True)
@click.option("--to", "to_date", required=True)
@click.option("--out", "out_dir", type=click.Path(), required=True)
@click.pass_obj
def export_cmd(ctx, project_id, topics, from_date, to_date, out_dir):
    """Partitioned raw export (UTC hour files) plus a hashed manifest."""
    from .timeutil import DAY_SECONDS, date_to_epoch_utc

    try:
        names = ctx.store.topics() if topics == "all" else topics.split(",")
        t0 = date_to_epoch_utc(parse_date(from_date))
        t1 = date_to_epoch_utc(parse_date(to_date)) + DAY_SECONDS
        manifest = export_raw(ctx.store, project_id, names, t0, t1, out_dir)
    except CohortkitError as e:
        raise _fail(e)
    ctx.emit(
        {"ok": True, "files": len(manifest["files"])},
        f"exported {len(manifest['files'])} files to {out_dir}",
    )


@main.command("catalog")
@click.pass_obj
def catalog_cmd(ctx):
    """Print the schema catalog as a self-describing document."""
    from .model import catalog_document

    click.echo(catalog_document(ctx.store.registry), nl=False)


# -- serve -----------------------------------------------------------------------


@main.command("serve")
@click.option("--bind", default=None, help="gateway+admin bind address, host:port")
@click.option("--with-mock-vendor", is_flag=True, default=False)
@click.option("--vendor-bind", default=None)
@click.option("--fixture-dir", type=click.Path(), default=None)
@click.option("--fixed-time", type=float, default=None, help="deterministic clock for reproducible runs")
@click.pass_obj
def serve(ctx, bind, with_mock_vendor, vendor_bind, fixture_dir, fixed_time):
    """Run gateway + registry admin (+ mock vendor) until SIGINT/SIGTERM."""
    cfg = ctx.config
    if fixed_time is not None:
        cfg.fixed_time = fixed_time
    clock = cfg.clock()
    store = LogStore(cfg.data_dir, fsync=cfg.fsync)
    store.create_catalog_topics()
    registry = StudyRegistry(
        cfg.data_dir, clock=clock, fsync=cfg.fsync, access_ttl_seconds=cfg.access_ttl_seconds
    )
    gateway = IngestionGateway(store, registry, clock=clock)
    routes = gateway.routes() + admin_routes(registry, cfg.admin_token)
    service = JsonService(bind or cfg.bind_addr, routes).start()
    vendor_service = None
    if with_mock_vendor:
        vendor = MockVendor(
            fixture_dir or (Path(cfg.data_dir) / "fixtures"),
            client_id=cfg.vendor_client_id,
            client_secret=cfg.vendor_client_secret,
            clock=clock,
        )
        vendor_service = JsonService(vendor_bind or cfg.vendor_bind_addr, vendor.routes()).start()
        click.echo(f"mock vendor listening on {vendor_service.url}")
    click.echo(f"cohortkit serving on {service.url} (data: {cfg.data_dir})")
    stop = threading.Event()

    def _signal(_signum, _frame):
        stop.set()

    signal.signal(signal.SIGINT, _signal)
    signal.signal(signal.SIGTERM, _signal)
    stop.wait()
    click.echo("shutting down")
    service.stop()
    if vendor_service:
        vendor_service.stop()
    store.close()
    registry.close()


if __name__ == "__main__":
    main()
