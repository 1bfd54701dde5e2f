"""HTTP surface. Paths, request/response field names, and the error-code to
status mapping below are frozen; see docs/api.md for the reference.

Authentication is a bearer token: instructor tokens are provisioned at
deployment, student tokens come from secure links (or the session's own
access token). All mutating endpoints are idempotent under a client-supplied
``X-Request-Id`` header: a duplicate id replays the stored response without
appending any new event.
"""

from __future__ import annotations

import dataclasses
import os
import threading
from datetime import datetime

from fastapi import Body, FastAPI, Request
from fastapi.exceptions import RequestValidationError
from fastapi.responses import FileResponse, JSONResponse

from .domain import exam_to_config, RubricDefinition
from .errors import MindExamError, SessionExists
from .events import EventKind
from .analytics import score_rubric
from .service import ExamService, Principal

STATUS_BY_CODE = {
    "invalid_config": 422,
    "validation_error": 422,
    "no_default_instruction": 422,
    "exam_exists": 409,
    "tool_disabled": 409,
    "tool_kind_mismatch": 422,
    "provider_timeout": 502,
    "provider_error": 502,
    "not_enrolled": 403,
    "exam_not_open": 409,
    "exam_closed": 410,
    "session_exists": 409,
    "order_violation": 409,
    "unknown_event": 422,
    "wrong_kind": 422,
    "sequence_conflict": 409,
    "storage_failure": 500,
    "unknown_session": 404,
    "schema_violation": 422,
    "invariant_violation": 422,
    "invalid_trace": 422,
    "level_out_of_range": 422,
    "unknown_exam": 404,
    "forbidden": 403,
    "unauthenticated": 401,
}


class ApiError(MindExamError):
    def __init__(self, code: str, message: str):
        self.code = code
        super().__init__(message)


def _error_body(code: str, message: str, extra: dict | None = None) -> dict:
    body = {"error": {"code": code, "message": message}}
    if extra:
        body["error"].update(extra)
    return body


def create_app(service: ExamService, static_dir: str | None = None) -> FastAPI:
    app = FastAPI(title="mindexam", docs_url=None, redoc_url=None)
    idempotency_cache: dict[tuple, tuple[int, dict]] = {}
    idempotency_lock = threading.Lock()

    # -- plumbing -----------------------------------------------------------

    @app.exception_handler(MindExamError)
    def handle_domain_error(request: Request, exc: MindExamError):
        status = STATUS_BY_CODE.get(exc.code, 500)
        extra = None
        if hasattr(exc, "violations"):
            extra = {"violations": [dataclasses.asdict(v) for v in exc.violations]}
        return JSONResponse(status_code=status,
                            content=_error_body(exc.code, exc.message, extra))

    @app.exception_handler(RequestValidationError)
    def handle_request_validation(request: Request, exc: RequestValidationError):
        return JSONResponse(status_code=422,
                            content=_error_body("validation_error", str(exc.errors()[:3])))

    def authenticate(request: Request) -> Principal:
        header = request.headers.get("authorization", "")
        if not header.lower().startswith("bearer "):
            raise ApiError("unauthenticated", "missing bearer token")
        principal = service.principal_for_token(header[7:].strip())
        if principal is None:
            raise ApiError("unauthenticated", "unknown token")
        return principal

    def require_instructor(request: Request) -> Principal:
        principal = authenticate(request)
        if principal.role != "instructor":
            raise ApiError("forbidden", "instructor role required")
        return principal

    def require_author(request: Request, exam_id: str) -> Principal:
        principal = require_instructor(request)
        exam = service.get_exam(exam_id)
        if principal.principal_id not in exam.authors:
            raise ApiError("forbidden", "not an author of this exam")
        return principal

    def require_session_student(request: Request, session_id: str) -> Principal:
        principal = authenticate(request)
        if principal.role != "student":
            raise ApiError("forbidden", "student role required")
        meta = service.store.get_session(session_id)
        grant = principal.grant
        if grant is None or (meta.student_id, meta.exam_id) != (grant.student_id,
                                                               grant.exam_id):
            raise ApiError("forbidden", "token does not grant access to this session")
        return principal

    def idem_key(request: Request) -> tuple | None:
        request_id = request.headers.get("x-request-id")
        if not request_id:
            return None
        return (request.headers.get("authorization", ""), request.method,
                request.url.path, request_id)

    def replay(request: Request) -> JSONResponse | None:
        key = idem_key(request)
        if key is None:
            return None
        with idempotency_lock:
            hit = idempotency_cache.get(key)
        if hit is None:
            return None
        return JSONResponse(status_code=hit[0], content=hit[1])

    def remember(request: Request, payload: dict, status: int = 200) -> JSONResponse:
        key = idem_key(request)
        if key is not None:
            with idempotency_lock:
                idempotency_cache[key] = (status, payload)
        return JSONResponse(status_code=status, content=payload)

    def now() -> datetime:
        return service.clock()

    def require_field(body: dict, name: str) -> str:
        value = body.get(name)
        if not isinstance(value, str):
            raise ApiError("validation_error", f"body field {name!r} must be text")
        return value

    # -- health ------------------------------------------------------------------

    @app.get("/healthz")
    def healthz():
        return {"status": "ok"}

    # -- exams ----------------------------------------------------------------

    @app.post("/exams")
    def create_exam(request: Request, body: dict = Body(...)):
        principal = require_instructor(request)
        cached = replay(request)
        if cached:
            return cached
        exam = service.create_exam(body, creator=principal.principal_id)
        return remember(request, {"exam_id": exam.exam_id}, status=201)

    @app.get("/exams/{exam_id}")
    def get_exam(exam_id: str, request: Request):
        require_author(request, exam_id)
        return exam_to_config(service.get_exam(exam_id))

    # -- sessions ---------------------------------------------------------------

    def session_view(exam, session) -> dict:
        questions = []
        for question in exam.questions:
            tools = []
            for policy in question.policies:
                if not policy.enabled:
                    continue  # disabled tools never reach the client
                tool = exam.tool(policy.tool_id)
                tools.append({"tool_id": tool.tool_id, "kind": tool.kind.value,
                              "display_name": tool.display_name})
            progress = session.per_question[question.question_id]
            questions.append({
                "question_id": question.question_id,
                "body": question.body,
                "instructor_answer": question.instructor_answer,
                "state": progress.state.value,
                "tools": tools,
            })
        return {
            "session_id": session.session_id,
            "access_token": session.access_token,
            "exam": {"exam_id": exam.exam_id, "title": exam.title,
                     "closes_at": exam.closes_at.isoformat()},
            "questions": questions,
        }

    @app.post("/exams/{exam_id}/sessions")
    def open_session(exam_id: str, request: Request):
        principal = authenticate(request)
        if principal.role != "student" or principal.grant is None:
            raise ApiError("forbidden", "a student secure-link token is required")
        if principal.grant.exam_id != exam_id:
            raise ApiError("forbidden", "token does not grant access to this exam")
        engine = service.engine(exam_id)
        try:
            session = service.open_session(principal.grant, now())
        except SessionExists as exc:
            session = engine.get_session(exc.session_id)
        return session_view(engine.exam, session)

    @app.post("/sessions/{session_id}/questions/{question_id}/initial")
    def submit_initial(session_id: str, question_id: str, request: Request,
                       body: dict = Body(...)):
        require_session_student(request, session_id)
        cached = replay(request)
        if cached:
            return cached
        engine = service.engine_for_session(session_id)
        event = engine.submit_initial_answer(session_id, question_id,
                                             require_field(body, "text"), now())
        return remember(request, {"event": event.to_wire()})

    @app.post("/sessions/{session_id}/questions/{question_id}/ai")
    def ask_ai(session_id: str, question_id: str, request: Request,
               body: dict = Body(...)):
        require_session_student(request, session_id)
        cached = replay(request)
        if cached:
            return cached
        engine = service.engine_for_session(session_id)
        events = engine.ask_ai(session_id, question_id,
                               require_field(body, "tool_id"),
                               require_field(body, "prompt"), now())
        return remember(request, {"events": [e.to_wire() for e in events]})

    @app.post("/sessions/{session_id}/questions/{question_id}/search")
    def run_search(session_id: str, question_id: str, request: Request,
                   body: dict = Body(...)):
        require_session_student(request, session_id)
        cached = replay(request)
        if cached:
            return cached
        engine = service.engine_for_session(session_id)
        limit = body.get("limit")
        if limit is not None and (not isinstance(limit, int) or limit < 0):
            raise ApiError("validation_error", "limit must be a non-negative integer")
        events = engine.run_search(session_id, question_id,
                                   require_field(body, "tool_id"),
                                   require_field(body, "query"), now(), limit=limit)
        return remember(request, {"events": [e.to_wire() for e in events]})

    @app.post("/sessions/{session_id}/questions/{question_id}/comment")
    def comment(session_id: str, question_id: str, request: Request,
                body: dict = Body(...)):
        require_session_student(request, session_id)
        cached = replay(request)
        if cached:
            return cached
        response_seq = body.get("response_seq")
        if not isinstance(response_seq, int):
            raise ApiError("validation_error", "body field 'response_seq' must be an integer")
        engine = service.engine_for_session(session_id)
        event = engine.comment_on_output(session_id, question_id, response_seq,
                                         require_field(body, "text"), now())
        return remember(request, {"event": event.to_wire()})

    @app.post("/sessions/{session_id}/questions/{question_id}/final")
    def submit_final(session_id: str, question_id: str, request: Request,
                     body: dict = Body(...)):
        require_session_student(request, session_id)
        cached = replay(request)
        if cached:
            return cached
        engine = service.engine_for_session(session_id)
        event = engine.submit_final_answer(session_id, question_id,
                                           require_field(body, "text"), now())
        return remember(request, {"event": event.to_wire()})

    @app.post("/sessions/{session_id}/focus")
    def focus(session_id: str, request: Request, body: dict = Body(...)):
        require_session_student(request, session_id)
        cached = replay(request)
        if cached:
            return cached
        kind_raw = body.get("kind")
        if kind_raw not in (EventKind.FOCUS_LOST.value, EventKind.FOCUS_REGAINED.value):
            raise ApiError("validation_error",
                           "body field 'kind' must be focus_lost or focus_regained")
        engine = service.engine_for_session(session_id)
        event = engine.record_focus_event(
            session_id, EventKind(kind_raw), now(),
            active_question_id=body.get("active_question_id"),
            client_ts=body.get("client_ts"))
        return remember(request, {"event": event.to_wire()})

    @app.get("/sessions/{session_id}/trace")
    def get_trace(session_id: str, request: Request):
        principal = authenticate(request)
        meta = service.store.get_session(session_id)
        if principal.role == "instructor":
            exam = service.get_exam(meta.exam_id)
            if principal.principal_id not in exam.authors:
                raise ApiError("forbidden", "not an author of this exam")
        else:
            require_session_student(request, session_id)
        events = service.store.load_trace(session_id)
        return {"session_id": meta.session_id, "exam_id": meta.exam_id,
                "student_id": meta.student_id,
                "events": [e.to_wire() for e in events]}

    # -- instructor analytics -----------------------------------------------------

    @app.get("/exams/{exam_id}/analytics")
    def exam_analytics(exam_id: str, request: Request):
        require_author(request, exam_id)
        rows = []
        for row in service.analytics_rows(exam_id):
            rows.append({
                "student_id": row.student_id,
                "status": row.status,
                "session_id": row.session_id,
                "per_question": {qid: dataclasses.asdict(ind)
                                 for qid, ind in row.per_question.items()},
                "off_task_count": row.off_task_count,
                "off_task_total_s": row.off_task_total_s,
                "scores": row.scores,
            })
        return {"exam_id": exam_id, "rows": rows}

    @app.post("/sessions/{session_id}/questions/{question_id}/rubric")
    def post_rubric(session_id: str, question_id: str, request: Request,
                    body: dict = Body(...)):
        meta = service.store.get_session(session_id)
        principal = require_author(request, meta.exam_id)
        cached = replay(request)
        if cached:
            return cached
        levels = body.get("levels")
        if not isinstance(levels, dict):
            raise ApiError("validation_error", "body field 'levels' must be an object")
        notes = body.get("notes", "")
        if not isinstance(notes, str):
            raise ApiError("validation_error", "body field 'notes' must be text")
        score = score_rubric(service.store, session_id, question_id, levels,
                             RubricDefinition(), principal.principal_id, notes)
        return remember(request, {"score": score.to_record()})

    # -- optional static webapp ------------------------------------------------------

    if static_dir:
        root = os.path.abspath(static_dir)

        @app.get("/{path:path}")
        def static(path: str):
            target = os.path.abspath(os.path.join(root, path or "index.html"))
            if not target.startswith(root + os.sep) or not os.path.isfile(target):
                target = os.path.join(root, "index.html")
            return FileResponse(target)

    return app
