"""HTTP front of the annotation store.

Annotator routes authenticate with a per-annotator token header; task
creation, annotator registration, and exports sit behind an admin token.
Validation failures surface as 422 with the violation named so the UI can
show them inline.
"""

from __future__ import annotations

from typing import Optional

from fastapi import Depends, FastAPI, Header, HTTPException
from pydantic import BaseModel, Field

from .store import (AnnotationError, AnnotationStore, AuthError,
                    SubmissionError)

ANNOTATOR_TOKEN_HEADER = "x-annotator-token"
ADMIN_TOKEN_HEADER = "x-admin-token"


class RegisterAnnotatorBody(BaseModel):
    annotator_id: str = Field(min_length=1)


class ScreeningBody(BaseModel):
    answers: list[str]


class RankingBody(BaseModel):
    permutation: list[str]


class McqValidationBody(BaseModel):
    plausible: bool
    selection: str
    free_text: Optional[str] = None


class RankingTaskBody(BaseModel):
    context: str
    candidates: list[dict]          # [{system, text}]
    seed: int = 0
    task_id: Optional[str] = None


class McqTaskBody(BaseModel):
    question: str
    options: dict[str, str]
    generated_correct: str
    task_id: Optional[str] = None


def create_app(store: AnnotationStore, admin_token: str) -> FastAPI:
    app = FastAPI(title="annotation-service")

    @app.get("/health")
    def health():
        return {"status": "ok"}

    def require_admin(x_admin_token: str = Header(default="")) -> None:
        if x_admin_token != admin_token:
            raise HTTPException(status_code=401, detail="admin token required")

    def require_annotator(x_annotator_token: str = Header(default="")) -> str:
        try:
            return store.authenticate(x_annotator_token)
        except AuthError as exc:
            raise HTTPException(status_code=401, detail=str(exc)) from exc

    @app.post("/annotators", dependencies=[Depends(require_admin)])
    def register_annotator(body: RegisterAnnotatorBody):
        try:
            token = store.register_annotator(body.annotator_id)
        except AnnotationError as exc:
            raise HTTPException(status_code=409, detail=str(exc)) from exc
        return {"annotator_id": body.annotator_id, "token": token}

    @app.post("/screening")
    def screening(body: ScreeningBody,
                  annotator_id: str = Depends(require_annotator)):
        try:
            record = store.screening_gate(annotator_id, body.answers)
        except AnnotationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"annotator_id": annotator_id, "score": record.score,
                "passed": record.passed}

    @app.get("/tasks")
    def list_tasks(kind: Optional[str] = None, limit: int = 50,
                   annotator_id: str = Depends(require_annotator)):
        try:
            return {"tasks": store.tasks_for(annotator_id, kind=kind,
                                             limit=limit)}
        except SubmissionError as exc:
            raise HTTPException(status_code=403, detail=str(exc)) from exc

    @app.get("/tasks/{task_id}")
    def get_task(task_id: str,
                 annotator_id: str = Depends(require_annotator)):
        del annotator_id
        try:
            return store.get_task(task_id).annotator_payload()
        except AnnotationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/tasks/{task_id}/ranking")
    def submit_ranking(task_id: str, body: RankingBody,
                       annotator_id: str = Depends(require_annotator)):
        try:
            return store.submit_ranking(task_id, annotator_id,
                                        body.permutation)
        except SubmissionError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except AnnotationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/tasks/{task_id}/mcq-validation")
    def submit_mcq(task_id: str, body: McqValidationBody,
                   annotator_id: str = Depends(require_annotator)):
        try:
            return store.submit_mcq_validation(
                task_id, annotator_id, plausible=body.plausible,
                selection=body.selection, free_text=body.free_text)
        except SubmissionError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        except AnnotationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.post("/admin/tasks/ranking", dependencies=[Depends(require_admin)])
    def create_ranking_task(body: RankingTaskBody):
        try:
            task = store.create_ranking_task(
                body.context,
                [(c["system"], c["text"]) for c in body.candidates],
                seed=body.seed, task_id=body.task_id)
        except AnnotationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"task_id": task.task_id}

    @app.post("/admin/tasks/mcq", dependencies=[Depends(require_admin)])
    def create_mcq_task(body: McqTaskBody):
        try:
            task = store.create_mcq_task(body.question, body.options,
                                         body.generated_correct,
                                         task_id=body.task_id)
        except AnnotationError as exc:
            raise HTTPException(status_code=422, detail=str(exc)) from exc
        return {"task_id": task.task_id}

    @app.get("/export/rankings", dependencies=[Depends(require_admin)])
    def export_rankings():
        try:
            return store.export_rankings()
        except AnnotationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    @app.get("/export/mcq", dependencies=[Depends(require_admin)])
    def export_mcq():
        try:
            return store.export_mcq_validation()
        except AnnotationError as exc:
            raise HTTPException(status_code=404, detail=str(exc)) from exc

    return app
