"""HTTP API for the annotation workflow, plus static hosting of the browser UI.

Endpoints:
- GET  /api/tasks/next?annotator=ID   next open task for that annotator
- POST /api/tasks/{task_id}/label     {"verdict": ..., "reason": ...}
- GET  /api/progress                  per-annotator and total counters
- GET  /api/agreement[?group=...]     pairwise kappas, mean, Fleiss
- GET  /api/records/{record_id}       full record with the scheme pattern

Error mapping: unknown task/record 404, wrong annotator 403, double submission
409, bad payloads 422, incomplete overlap 409 with the missing pairs. The UI
bundle (if present) is served at /.
"""

from __future__ import annotations

from pathlib import Path
from typing import Mapping

from fastapi import FastAPI, HTTPException, Query
from fastapi.responses import JSONResponse
from fastapi.staticfiles import StaticFiles
from pydantic import BaseModel

from .annotation import (
    LabelStore,
    REASONS,
    VERDICTS,
    agreement_report,
)
from .errors import (
    AlreadyLabeled,
    EmptyOverlap,
    IncompleteOverlap,
    MissingReason,
    NlasError,
    UnknownTask,
    WrongAnnotator,
)
from .records import NlasRecord, record_to_dict
from .registry import Registry


class LabelPayload(BaseModel):
    verdict: str
    reason: str | None = None
    annotator: str | None = None  # checked against the task assignment when sent


def _task_view(store: LabelStore, registry: Registry,
               records: Mapping[str, NlasRecord], task) -> dict:
    record = records[task.record_id]
    scheme = registry.scheme(record.key.scheme)
    topic = registry.topic(record.key.topic_id)
    progress = store.progress()
    mine = progress["annotators"].get(task.assigned_to, {"assigned": 0, "labeled": 0})
    return {
        "task_id": task.task_id,
        "record_id": record.id,
        "annotator": task.assigned_to,
        "language": record.key.language,
        "stance": record.key.stance,
        "topic": topic.surface(record.key.language),
        "scheme": {
            "acronym": scheme.acronym,
            "name": scheme.name if record.key.language == "en" else scheme.name_es,
            "pattern": registry.render_pattern(scheme.acronym, record.key.language),
        },
        "components": [{"role": c.role, "text": c.text} for c in record.components],
        "verdicts": list(VERDICTS),
        "reasons": list(REASONS),
        "progress": {"labeled": mine["labeled"], "assigned": mine["assigned"]},
    }


def create_app(store: LabelStore, records: Mapping[str, NlasRecord],
               registry: Registry, ui_dir: str | Path | None = None) -> FastAPI:
    app = FastAPI(title="annotation server", docs_url=None, redoc_url=None)

    @app.exception_handler(NlasError)
    async def domain_error(_, exc: NlasError):
        status = 400
        if isinstance(exc, UnknownTask):
            status = 404
        elif isinstance(exc, WrongAnnotator):
            status = 403
        elif isinstance(exc, (AlreadyLabeled, IncompleteOverlap)):
            status = 409
        elif isinstance(exc, (MissingReason,)):
            status = 422
        payload = {"error": type(exc).__name__, "detail": str(exc)}
        if isinstance(exc, IncompleteOverlap):
            payload["missing"] = [{"record_id": r, "annotator": a} for r, a in exc.missing]
        return JSONResponse(status_code=status, content=payload)

    @app.get("/api/tasks/next")
    def next_task(annotator: str = Query(...)):
        task = store.next_task(annotator)
        if task is None:
            progress = store.progress()
            mine = progress["annotators"].get(annotator, {"assigned": 0, "labeled": 0})
            return {"done": True, "progress": {"labeled": mine["labeled"],
                                               "assigned": mine["assigned"]}}
        return {"done": False, **_task_view(store, registry, records, task)}

    @app.post("/api/tasks/{task_id}/label")
    def submit_label(task_id: str, payload: LabelPayload):
        task = store.task(task_id)
        label = store.submit(task_id, payload.annotator or task.assigned_to,
                             payload.verdict, payload.reason)
        return {
            "task_id": task_id,
            "record_id": label.record_id,
            "annotator": label.annotator,
            "verdict": label.verdict,
            "reason": label.reason,
        }

    @app.get("/api/progress")
    def progress():
        return store.progress()

    @app.get("/api/agreement")
    def agreement(group: str | None = None):
        try:
            report = agreement_report(store, group)
        except EmptyOverlap as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from None
        return {
            "group": report.group,
            "n_records": report.n_records,
            "pairs": [
                {"annotators": [p.annotator_a, p.annotator_b], "n": p.n,
                 "observed_agreement": p.observed_agreement,
                 "expected_agreement": p.expected_agreement, "kappa": p.kappa}
                for p in report.pairs
            ],
            "mean_kappa": report.mean_kappa,
            "fleiss_kappa": report.fleiss,
        }

    @app.get("/api/records/{record_id}")
    def get_record(record_id: str):
        record = records.get(record_id)
        if record is None:
            raise HTTPException(status_code=404, detail=f"unknown record: {record_id}")
        data = record_to_dict(record)
        data["pattern"] = registry.render_pattern(record.key.scheme, record.key.language)
        return data

    if ui_dir is not None and Path(ui_dir).is_dir():
        app.mount("/", StaticFiles(directory=str(ui_dir), html=True), name="ui")

    return app


def serve(app: FastAPI, host: str = "127.0.0.1", port: int = 8765) -> None:
    import uvicorn

    uvicorn.run(app, host=host, port=port, log_level="warning")
