"""Application layer: exam registry, secure-link grants, principals, and the
operations the HTTP API and CLI both delegate to.

State lives under a data directory (exams as config documents, traces and
scores in the append-only store, grants in a grant log); with no directory
everything stays in memory, which is what the tests use.
"""

from __future__ import annotations

import json
import os
import secrets
from dataclasses import dataclass
from datetime import datetime, timezone

from . import analytics
from .domain import Exam, exam_to_config, validate_exam_config
from .errors import ExamExists, StorageFailure, UnknownExam
from .gateway import ProviderConfig, ProviderRegistry
from .session import SessionEngine, Session
from .tracestore import FileTraceStore, MemoryTraceStore, export_trace, import_trace


@dataclass(frozen=True)
class AccessGrant:
    """Secure-link capability: one student, one exam."""

    token: str
    exam_id: str
    student_id: str


@dataclass(frozen=True)
class Principal:
    role: str  # instructor | student
    principal_id: str
    grant: AccessGrant | None = None


def providers_from_config(doc: dict) -> ProviderRegistry:
    configs = {}
    for ref, entry in (doc.get("providers") or {}).items():
        configs[ref] = ProviderConfig(
            provider_ref=ref,
            endpoint=entry.get("endpoint", ""),
            model=entry.get("model", ""),
            credential_env=entry.get("credential_env"),
            timeout_s=float(entry.get("timeout_s", 60.0)),
        )
    return ProviderRegistry(configs)


class ExamService:
    def __init__(self, data_dir: str | os.PathLike | None = None,
                 providers: ProviderRegistry | None = None,
                 clock=None):
        self.clock = clock or (lambda: datetime.now(timezone.utc))
        self.data_dir = str(data_dir) if data_dir is not None else None
        self.store: MemoryTraceStore
        if self.data_dir is not None:
            os.makedirs(self.data_dir, exist_ok=True)
            self.store = FileTraceStore(self.data_dir)
        else:
            self.store = MemoryTraceStore()
        self.providers = providers or ProviderRegistry()
        self.exams: dict[str, Exam] = {}
        self.engines: dict[str, SessionEngine] = {}
        self.grants: dict[str, AccessGrant] = {}
        self.instructor_tokens: dict[str, str] = {}  # token -> instructor id
        self._load_persisted()

    # -- persistence -------------------------------------------------------

    def _exams_dir(self) -> str | None:
        return os.path.join(self.data_dir, "exams") if self.data_dir else None

    def _grants_path(self) -> str | None:
        return os.path.join(self.data_dir, "grants.jsonl") if self.data_dir else None

    def _load_persisted(self) -> None:
        exams_dir = self._exams_dir()
        if exams_dir and os.path.isdir(exams_dir):
            for name in sorted(os.listdir(exams_dir)):
                if not name.endswith(".json"):
                    continue
                with open(os.path.join(exams_dir, name), encoding="utf-8") as f:
                    exam = validate_exam_config(json.load(f))
                self._register(exam)
        grants_path = self._grants_path()
        if grants_path and os.path.exists(grants_path):
            with open(grants_path, encoding="utf-8") as f:
                for line in f:
                    if not line.strip():
                        continue
                    row = json.loads(line)
                    grant = AccessGrant(token=row["token"], exam_id=row["exam_id"],
                                        student_id=row["student_id"])
                    self.grants[grant.token] = grant

    def _register(self, exam: Exam) -> None:
        self.exams[exam.exam_id] = exam
        self.engines[exam.exam_id] = SessionEngine(exam, self.store, self.providers)

    # -- instructors ----------------------------------------------------------

    def add_instructor(self, instructor_id: str, token: str) -> None:
        self.instructor_tokens[token] = instructor_id

    def principal_for_token(self, token: str) -> Principal | None:
        instructor = self.instructor_tokens.get(token)
        if instructor is not None:
            return Principal(role="instructor", principal_id=instructor)
        grant = self.grants.get(token)
        if grant is not None:
            return Principal(role="student", principal_id=grant.student_id, grant=grant)
        # a session's own access token is a narrower student capability
        for meta in self.store.sessions():
            if meta.access_token and secrets.compare_digest(meta.access_token, token):
                return Principal(role="student", principal_id=meta.student_id,
                                 grant=AccessGrant(token=token, exam_id=meta.exam_id,
                                                   student_id=meta.student_id))
        return None

    # -- exams -------------------------------------------------------------------

    def create_exam(self, doc: dict, creator: str | None = None) -> Exam:
        exam = validate_exam_config(doc)
        if creator and creator not in exam.authors:
            exam = validate_exam_config({**exam_to_config(exam),
                                         "authors": sorted(exam.authors | {creator})})
        if exam.exam_id in self.exams:
            raise ExamExists(f"exam {exam.exam_id!r} already exists")
        self._register(exam)
        exams_dir = self._exams_dir()
        if exams_dir:
            os.makedirs(exams_dir, exist_ok=True)
            path = os.path.join(exams_dir, f"{exam.exam_id}.json")
            try:
                with open(path, "w", encoding="utf-8") as f:
                    json.dump(exam_to_config(exam), f, ensure_ascii=False, indent=2)
            except OSError as exc:
                raise StorageFailure(f"cannot persist exam: {exc}") from exc
        return exam

    def get_exam(self, exam_id: str) -> Exam:
        exam = self.exams.get(exam_id)
        if exam is None:
            raise UnknownExam(f"no exam {exam_id!r}")
        return exam

    def engine(self, exam_id: str) -> SessionEngine:
        self.get_exam(exam_id)
        return self.engines[exam_id]

    def engine_for_session(self, session_id: str) -> SessionEngine:
        meta = self.store.get_session(session_id)
        return self.engine(meta.exam_id)

    # -- secure links -----------------------------------------------------------

    def issue_links(self, exam_id: str,
                    base_url: str = "http://localhost:8000") -> list[dict]:
        """One capability URL per enrolled student; existing grants are reused
        so links stay stable across invocations."""
        exam = self.get_exam(exam_id)
        existing = {(g.exam_id, g.student_id): g for g in self.grants.values()}
        rows = []
        for student_id in sorted(exam.enrolled_students):
            grant = existing.get((exam_id, student_id))
            if grant is None:
                grant = AccessGrant(token=secrets.token_urlsafe(32),
                                    exam_id=exam_id, student_id=student_id)
                self.grants[grant.token] = grant
                self._persist_grant(grant)
            rows.append({
                "student_id": student_id,
                "token": grant.token,
                "url": f"{base_url.rstrip('/')}/exam/{exam_id}?token={grant.token}",
            })
        return rows

    def _persist_grant(self, grant: AccessGrant) -> None:
        path = self._grants_path()
        if not path:
            return
        try:
            with open(path, "a", encoding="utf-8") as f:
                f.write(json.dumps({"token": grant.token, "exam_id": grant.exam_id,
                                    "student_id": grant.student_id}) + "\n")
                f.flush()
                os.fsync(f.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot persist grant: {exc}") from exc

    # -- delegated operations ------------------------------------------------------

    def open_session(self, grant: AccessGrant, now: datetime | None = None) -> Session:
        engine = self.engine(grant.exam_id)
        return engine.open_session(grant.student_id, grant.exam_id,
                                   now or self.clock())

    def export_trace(self, session_id: str) -> str:
        return export_trace(self.store, session_id)

    def import_trace(self, document: str) -> str:
        return import_trace(self.store, document)

    def analytics_rows(self, exam_id: str) -> list[analytics.StudentRow]:
        return analytics.analytics_summary(exam_id, self.exams, self.store)

    def score_report(self, exam_id: str) -> str:
        return analytics.score_report(exam_id, self.exams, self.store)
