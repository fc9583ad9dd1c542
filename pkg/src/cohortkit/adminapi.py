"""Registry admin HTTP endpoints under /v1/admin, guarded by a static token."""

from __future__ import annotations

from dataclasses import asdict

from .errors import CohortkitError
from .httpkit import HttpError, Request, Route
from .registry import Project, StudyRegistry

_ERROR_STATUS = {
    "duplicate_project": 409,
    "duplicate_source": 409,
    "unknown_project": 404,
    "unknown_user": 404,
    "enrollment_closed": 409,
    "token_unknown": 401,
    "token_expired": 401,
    "token_used": 409,
    "schema_error": 400,
    "protocol_invalid": 400,
}


def _wrap(fn):
    def handler(request: Request):
        try:
            return fn(request)
        except CohortkitError as e:
            raise HttpError(_ERROR_STATUS.get(e.code, 400), e.code, str(e))

    return handler


def admin_routes(registry: StudyRegistry, admin_token: str) -> list[Route]:
    def guard(request: Request):
        if request.bearer() != admin_token:
            raise HttpError(403, "forbidden", "bad admin token")

    def create_project(request: Request):
        guard(request)
        body = request.json()
        project = Project(
            project_id=body["projectId"],
            recruitment_mode=body["mode"],
            protocol_id=body.get("protocolId", ""),
            target_size=body.get("targetSize"),
            enrollment_deadline=body.get("enrollmentDeadline"),
            study_start=body.get("studyStart"),
            cohort_starts=body.get("cohortStarts") or {},
        )
        registry.create_project(project)
        return 201, {"projectId": project.project_id}

    def list_projects(request: Request):
        guard(request)
        return 200, {"projects": [asdict(p) for _, p in sorted(registry.projects.items())]}

    def store_protocol(request: Request):
        guard(request)
        registry.store_protocol(request.params["pid"], request.json()["document"])
        return 201, {"protocolId": request.params["pid"]}

    def new_token(request: Request):
        guard(request)
        body = request.json()
        token = registry.generate_enrollment_token(
            body["projectId"], float(body.get("ttlSeconds", 86400)), body.get("cohort")
        )
        return 201, asdict(token)

    def enroll(request: Request):
        guard(request)
        body = request.json()
        result = registry.redeem_token(body["token"], int(body.get("timezoneOffsetMinutes", 0)))
        return 201, result

    def add_source(request: Request):
        guard(request)
        body = request.json()
        source = registry.register_source(body["userId"], body["sourceType"])
        return 201, asdict(source)

    def withdraw(request: Request):
        guard(request)
        registry.withdraw(request.json()["userId"])
        return 200, {"ok": True}

    def participants(request: Request):
        guard(request)
        project_id = request.query.get("projectId", "")
        return 200, {
            "participants": [asdict(p) for p in registry.list_participants(project_id)]
        }

    return [
        Route.make("POST", r"/v1/admin/projects", _wrap(create_project)),
        Route.make("GET", r"/v1/admin/projects", _wrap(list_projects)),
        Route.make("POST", r"/v1/admin/protocols/(?P<pid>[A-Za-z0-9_-]+)", _wrap(store_protocol)),
        Route.make("POST", r"/v1/admin/tokens", _wrap(new_token)),
        Route.make("POST", r"/v1/admin/enroll", _wrap(enroll)),
        Route.make("POST", r"/v1/admin/sources", _wrap(add_source)),
        Route.make("POST", r"/v1/admin/withdraw", _wrap(withdraw)),
        Route.make("GET", r"/v1/admin/participants", _wrap(participants)),
    ]
