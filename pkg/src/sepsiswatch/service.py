"""HTTP facade over the platform: the endpoints the dashboard consumes.

Every response body carries the feature-schema version so clients can
detect incompatible payloads.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .platform import (
    SCHEMA_VERSION,
    ConflictError,
    DocumentStore,
    ModelService,
    NotFoundError,
    Orchestrator,
    PlatformError,
    QueryError,
    ValidationError,
    WorkflowBoard,
)


def _envelope(payload: dict) -> dict:
    return {"schema_version": SCHEMA_VERSION, **payload}


def _error_status(exc: PlatformError) -> int:
    if isinstance(exc, NotFoundError):
        return 404
    if isinstance(exc, ConflictError):
        return 409
    if isinstance(exc, (ValidationError, QueryError)):
        return 400
    return 500


def build_app(
    service: ModelService,
    store: DocumentStore,
    board: WorkflowBoard,
    orchestrator: Orchestrator | None = None,
) -> FastAPI:
    app = FastAPI(title="sepsiswatch", docs_url=None, redoc_url=None)
    audit = service.audit

    def now_hour() -> int:
        return orchestrator.clock_hour if orchestrator is not None else 0

    @app.exception_handler(PlatformError)
    async def platform_error(_: Request, exc: PlatformError):
        return JSONResponse(
            status_code=_error_status(exc),
            content=_envelope({"error": type(exc).__name__, "detail": str(exc)}),
        )

    @app.post("/score")
    async def score(request: Request):
        try:
            payload = await request.json()
        except Exception:
            audit.append("score", "failure:unparseable body")
            raise ValidationError("request body must be a JSON document") from None
        return _envelope(service.score_request(payload))

    @app.get("/patients")
    async def patients():
        hour = now_hour()
        cards = []
        for pid in store.patients():
            doc = store.latest(pid)
            body = doc.to_json()
            body["workflow_state"] = board.state(pid, hour)
            cards.append(body)
        cards.sort(key=lambda d: (-d["risk_score"], d["patient_id"]))
        audit.append("patients", "success")
        return _envelope({"clock_hour": hour, "patients": cards})

    @app.get("/patients/{patient_id}/timeseries")
    async def timeseries(patient_id: str, request: Request):
        try:
            t_from = int(request.query_params.get("from", ""))
            t_to = int(request.query_params.get("to", ""))
        except ValueError:
            audit.append("timeseries", "failure:bad range")
            raise ValidationError("from/to must be integer hours") from None
        if patient_id not in store.patients():
            audit.append("timeseries", f"failure:unknown patient {patient_id}")
            raise NotFoundError(f"unknown patient {patient_id!r}")
        try:
            docs = store.query(patient_id, t_from, t_to)
        except QueryError as exc:
            audit.append("timeseries", f"failure:{exc}")
            raise
        audit.append("timeseries", "success")
        return _envelope(
            {"patient_id": patient_id, "documents": [d.to_json() for d in docs]}
        )

    @app.post("/patients/{patient_id}/workflow")
    async def workflow(patient_id: str, request: Request):
        try:
            body = await request.json()
        except Exception:
            audit.append("workflow", "failure:unparseable body")
            raise ValidationError("request body must be a JSON document") from None
        action = body.get("action")
        hours = body.get("hours")
        try:
            state = board.transition(
                patient_id, action, now_hour(), hours=hours
            )
        except PlatformError as exc:
            audit.append("workflow", f"failure:{exc}")
            raise
        audit.append("workflow", "success")
        return _envelope({"patient_id": patient_id, "workflow_state": state})

    @app.get("/trends")
    async def trends(request: Request):
        try:
            hours = int(request.query_params.get("hours", ""))
        except ValueError:
            audit.append("trends", "failure:bad hours")
            raise ValidationError("hours must be an integer") from None
        try:
            rows = store.trend(now_hour(), hours)
        except QueryError as exc:
            audit.append("trends", f"failure:{exc}")
            raise
        audit.append("trends", "success")
        return _envelope({"trend": rows})

    @app.get("/audit")
    async def audit_view():
        entries = [
            {
                "request_id": e.request_id,
                "arrival": e.arrival,
                "endpoint": e.endpoint,
                "outcome": e.outcome,
            }
            for e in audit.entries()
        ]
        return _envelope({"entries": entries, "count": len(entries)})

    return app
