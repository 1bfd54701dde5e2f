"""Per-question exam workflow: initial answer before any tool use, iterative
exploration, final answer. Every step is appended to the trace.

The state machine per (session, question):

    AwaitingInitial --initial_answer--> Exploring --final_answer--> Finalized
    Exploring --initial_answer_edit--> Exploring       (only before tool use)
    Finalized --revision--> Exploring --final_answer--> Finalized  (resubmission)

Operations on one session are serialized behind a per-session lock, so seq
assignment and state transitions are race-free; distinct sessions proceed
concurrently.
"""

from __future__ import annotations

import secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass, field
from datetime import datetime
from enum import Enum
from typing import TYPE_CHECKING

from . import gateway
from .domain import Exam, ToolKind
from .errors import (
    ExamClosed,
    ExamNotOpen,
    InvariantViolation,
    NotEnrolled,
    OrderViolation,
    ProviderError,
    ProviderTimeout,
    SequenceConflict,
    SessionExists,
    ToolDisabled,
    UnknownEvent,
    UnknownSession,
    WrongKind,
    WrongToolKind,
)
from .events import (
    FOCUS_EVENT_KINDS,
    TOOL_EVENT_KINDS,
    EventKind,
    TraceEvent,
    truncate_ms,
)

if TYPE_CHECKING:
    from .gateway import ProviderRegistry
    from .tracestore import TraceStore

DEFAULT_SEARCH_LIMIT = 5


class QuestionState(str, Enum):
    AWAITING_INITIAL = "awaiting_initial"
    EXPLORING = "exploring"
    FINALIZED = "finalized"


@dataclass
class QuestionProgress:
    state: QuestionState = QuestionState.AWAITING_INITIAL
    event_count: int = 0
    tool_event_count: int = 0


@dataclass
class Session:
    session_id: str
    student_id: str
    exam_id: str
    access_token: str
    per_question: dict[str, QuestionProgress] = field(default_factory=dict)


def replay_question(events: list[TraceEvent]) -> QuestionProgress:
    """Rebuild the QuestionProgress a question stream ends in.

    Deterministic: replaying a stored trace reproduces the engine's state.
    Raises InvariantViolation if the stream could not have been produced by
    the engine (used to vet imported documents).
    """
    progress = QuestionProgress()
    known: dict[int, EventKind] = {}
    for index, event in enumerate(events):
        kind = event.kind
        state = progress.state
        if kind in FOCUS_EVENT_KINDS:
            raise InvariantViolation("session-scope-kinds", index,
                                     "focus events belong to the session-scope stream")
        if state is QuestionState.AWAITING_INITIAL:
            if kind is not EventKind.INITIAL_ANSWER:
                raise InvariantViolation("initial-answer-first", index,
                                         f"stream starts with {kind.value}")
            progress.state = QuestionState.EXPLORING
        elif state is QuestionState.EXPLORING:
            if kind is EventKind.INITIAL_ANSWER:
                raise InvariantViolation("single-initial-answer", index)
            elif kind is EventKind.INITIAL_ANSWER_EDIT:
                if progress.tool_event_count:
                    raise InvariantViolation("edit-before-tools", index)
            elif kind is EventKind.FINAL_ANSWER:
                progress.state = QuestionState.FINALIZED
            elif kind is EventKind.REVISION:
                raise InvariantViolation("revision-reopens-final", index)
            elif kind is EventKind.AI_RESPONSE:
                _check_link(known, event, EventKind.AI_PROMPT,
                            "response-links-prompt", index)
            elif kind is EventKind.AI_COMMENT:
                _check_link(known, event, EventKind.AI_RESPONSE,
                            "comment-links-response", index)
            elif kind is EventKind.SEARCH_RESULTS:
                _check_link(known, event, EventKind.SEARCH_QUERY,
                            "results-link-query", index)
            elif kind is EventKind.TOOL_ERROR:
                _check_link(known, event, (EventKind.AI_PROMPT, EventKind.SEARCH_QUERY),
                            "error-links-attempt", index)
        else:  # Finalized: reopen marker or post-hoc comments only
            if kind is EventKind.REVISION:
                progress.state = QuestionState.EXPLORING
            elif kind is EventKind.AI_COMMENT:
                _check_link(known, event, EventKind.AI_RESPONSE,
                            "comment-links-response", index)
            else:
                raise InvariantViolation("finalized-allows-revision-or-comment", index,
                                         f"got {kind.value}")
        if kind in TOOL_EVENT_KINDS:
            progress.tool_event_count += 1
        progress.event_count += 1
        known[event.seq] = kind
    return progress


def _check_link(known: dict[int, EventKind], event: TraceEvent,
                expected: EventKind | tuple[EventKind, ...],
                invariant: str, index: int) -> None:
    expected_kinds = expected if isinstance(expected, tuple) else (expected,)
    linked = event.payload.get("linked_seq")
    if not isinstance(linked, int) or linked not in known:
        raise InvariantViolation(invariant, index, "linked_seq missing or not earlier")
    if known[linked] not in expected_kinds:
        raise InvariantViolation(invariant, index,
                                 f"linked event is {known[linked].value}")


def check_stream_invariants(events: list[TraceEvent]) -> None:
    """Validate any event list (possibly several streams merged).

    Checks per-stream gapless seq from 1, non-decreasing timestamps, the
    state machine replay above for question streams, and focus-only kinds in
    the session-scope stream. Raises InvariantViolation carrying the index
    of the offending event in ``events``.
    """
    streams: dict[str | None, list[tuple[int, TraceEvent]]] = {}
    for index, event in enumerate(events):
        streams.setdefault(event.question_id, []).append((index, event))
    for question_id, indexed in streams.items():
        indexed = sorted(indexed, key=lambda pair: pair[1].seq)
        last_ts = None
        for offset, (index, event) in enumerate(indexed):
            if event.seq != offset + 1:
                raise InvariantViolation("gapless-seq", index,
                                         f"expected seq {offset + 1}, got {event.seq}")
            if last_ts is not None and event.ts < last_ts:
                raise InvariantViolation("non-decreasing-timestamps", index)
            last_ts = event.ts
        ordered = [event for _, event in indexed]
        if question_id is None:
            for index, event in indexed:
                if event.kind not in FOCUS_EVENT_KINDS:
                    raise InvariantViolation("session-scope-kinds", index,
                                             f"{event.kind.value} needs a question")
        else:
            try:
                replay_question(ordered)
            except InvariantViolation as exc:
                # remap stream-local index to position in the caller's list
                local = exc.line
                index = indexed[local][0] if local is not None else None
                raise InvariantViolation(exc.invariant, index) from None


class SessionEngine:
    """Runs one exam's sessions against a trace store and provider registry."""

    def __init__(self, exam: Exam, store: "TraceStore",
                 providers: "ProviderRegistry | None" = None,
                 history_cap: int = gateway.DEFAULT_HISTORY_CAP,
                 search_limit: int = DEFAULT_SEARCH_LIMIT):
        self.exam = exam
        self.store = store
        self.providers = providers or gateway.ProviderRegistry()
        self.history_cap = history_cap
        self.search_limit = search_limit
        self._sessions: dict[str, Session] = {}
        self._by_student: dict[str, str] = {}
        self._locks: dict[str, threading.Lock] = {}
        self._registry_lock = threading.Lock()
        for meta in store.sessions_for_exam(exam.exam_id):
            self._restore(meta)

    # -- session registry ---------------------------------------------------

    def _restore(self, meta) -> None:
        session = Session(session_id=meta.session_id, student_id=meta.student_id,
                          exam_id=meta.exam_id, access_token=meta.access_token or "")
        for question in self.exam.questions:
            stream = self.store.load_trace(meta.session_id, question.question_id)
            session.per_question[question.question_id] = (
                replay_question(stream) if stream else QuestionProgress())
        self._sessions[session.session_id] = session
        self._by_student[session.student_id] = session.session_id
        self._locks[session.session_id] = threading.Lock()

    def get_session(self, session_id: str) -> Session | None:
        return self._sessions.get(session_id)

    def sessions(self) -> list[Session]:
        return list(self._sessions.values())

    # -- operations ----------------------------------------------------------

    def open_session(self, student_id: str, exam_id: str, now: datetime) -> Session:
        if exam_id != self.exam.exam_id:
            raise NotEnrolled(f"exam {exam_id!r} is not served by this engine")
        if student_id not in self.exam.enrolled_students:
            raise NotEnrolled(f"student {student_id!r} is not enrolled")
        now = truncate_ms(now)
        if now >= self.exam.closes_at:
            raise ExamClosed("the exam window has closed")
        if now < self.exam.opens_at:
            raise ExamNotOpen("the exam has not opened yet")
        with self._registry_lock:
            existing = self._by_student.get(student_id)
            if existing is not None:
                raise SessionExists(existing)
            session = Session(
                session_id=secrets.token_hex(8),
                student_id=student_id,
                exam_id=exam_id,
                access_token=secrets.token_urlsafe(32),
                per_question={q.question_id: QuestionProgress()
                              for q in self.exam.questions},
            )
            from .tracestore import SessionMeta
            self.store.register_session(SessionMeta(
                session_id=session.session_id, exam_id=exam_id,
                student_id=student_id, access_token=session.access_token,
                opened_at=now))
            self._sessions[session.session_id] = session
            self._by_student[student_id] = session.session_id
            self._locks[session.session_id] = threading.Lock()
        return session

    def submit_initial_answer(self, session_id: str, question_id: str,
                              text: str, now: datetime) -> TraceEvent:
        with self._op(session_id, now) as (session, now):
            progress = self._progress(session, question_id)
            if progress.state is QuestionState.AWAITING_INITIAL:
                kind = EventKind.INITIAL_ANSWER
            elif (progress.state is QuestionState.EXPLORING
                  and progress.tool_event_count == 0):
                kind = EventKind.INITIAL_ANSWER_EDIT
            else:
                raise OrderViolation(
                    "the initial answer is locked once tools have been used")
            event = self._append(session, question_id, kind, {"text": text}, now)
            progress.state = QuestionState.EXPLORING
            return event

    def ask_ai(self, session_id: str, question_id: str, tool_id: str,
               prompt: str, now: datetime) -> tuple[TraceEvent, TraceEvent]:
        """Returns (AIPrompt, AIResponse) or (AIPrompt, ToolError) on provider failure."""
        with self._op(session_id, now) as (session, now):
            progress = self._progress(session, question_id)
            if progress.state is not QuestionState.EXPLORING:
                raise OrderViolation("tools are available only after the initial answer "
                                     "and before the final answer")
            question = self.exam.question(question_id)
            policy, tool = self._enabled_tool(question, tool_id, ToolKind.CHAT_MODEL)
            history = self._history(session.session_id, question_id, tool_id)
            request = gateway.compose_request(policy, question, history, prompt,
                                              history_cap=self.history_cap)
            prompt_event = self._append(session, question_id, EventKind.AI_PROMPT,
                                        {"tool_id": tool_id, "text": prompt}, now)
            try:
                response = gateway.dispatch_chat(request, self.providers.chat(tool.provider_ref))
            except (ProviderTimeout, ProviderError) as exc:
                error_event = self._append(session, question_id, EventKind.TOOL_ERROR, {
                    "linked_seq": prompt_event.seq,
                    "tool_id": tool_id,
                    "error_code": exc.code if isinstance(exc, ProviderTimeout) else exc.status,
                    "message": exc.message,
                }, now)
                return prompt_event, error_event
            response_event = self._append(session, question_id, EventKind.AI_RESPONSE, {
                "linked_seq": prompt_event.seq,
                "tool_id": tool_id,
                "text": response.text,
                "latency_ms": response.latency_ms,
                "provider_meta": response.provider_meta,
            }, now)
            return prompt_event, response_event

    def run_search(self, session_id: str, question_id: str, tool_id: str,
                   query: str, now: datetime,
                   limit: int | None = None) -> tuple[TraceEvent, TraceEvent]:
        """Returns (SearchQuery, SearchResults) or (SearchQuery, ToolError)."""
        with self._op(session_id, now) as (session, now):
            progress = self._progress(session, question_id)
            if progress.state is not QuestionState.EXPLORING:
                raise OrderViolation("tools are available only after the initial answer "
                                     "and before the final answer")
            question = self.exam.question(question_id)
            _, tool = self._enabled_tool(question, tool_id, ToolKind.SEARCH_ENGINE)
            query_event = self._append(session, question_id, EventKind.SEARCH_QUERY,
                                       {"tool_id": tool_id, "text": query}, now)
            try:
                results = gateway.dispatch_search(
                    query, self.providers.search(tool.provider_ref),
                    self.search_limit if limit is None else limit)
            except (ProviderTimeout, ProviderError) as exc:
                error_event = self._append(session, question_id, EventKind.TOOL_ERROR, {
                    "linked_seq": query_event.seq,
                    "tool_id": tool_id,
                    "error_code": exc.code if isinstance(exc, ProviderTimeout) else exc.status,
                    "message": exc.message,
                }, now)
                return query_event, error_event
            results_event = self._append(session, question_id, EventKind.SEARCH_RESULTS, {
                "linked_seq": query_event.seq,
                "tool_id": tool_id,
                "results": [{"rank": r.rank, "title": r.title,
                             "snippet": r.snippet, "url": r.url} for r in results],
            }, now)
            return query_event, results_event

    def comment_on_output(self, session_id: str, question_id: str,
                          response_seq: int, text: str, now: datetime) -> TraceEvent:
        with self._op(session_id, now) as (session, now):
            self._progress(session, question_id)
            stream = self.store.load_trace(session_id, question_id)
            target = next((e for e in stream if e.seq == response_seq), None)
            if target is None:
                raise UnknownEvent(f"no event with seq {response_seq} for this question")
            if target.kind is not EventKind.AI_RESPONSE:
                raise WrongKind(f"seq {response_seq} is {target.kind.value}, "
                                "comments attach to AI responses")
            return self._append(session, question_id, EventKind.AI_COMMENT,
                                {"linked_seq": response_seq, "text": text}, now)

    def record_focus_event(self, session_id: str, kind: EventKind, now: datetime,
                           active_question_id: str | None = None,
                           client_ts: str | None = None) -> TraceEvent:
        if kind not in FOCUS_EVENT_KINDS:
            raise WrongKind("focus events are focus_lost or focus_regained")
        with self._op(session_id, now) as (session, now):
            # session-scope stream; the client-reported active question and
            # client clock are recorded but never trusted for ordering
            return self._append(session, None, kind, {
                "active_question_id": active_question_id,
                "client_ts": client_ts,
            }, now)

    def submit_final_answer(self, session_id: str, question_id: str,
                            text: str, now: datetime) -> TraceEvent:
        with self._op(session_id, now) as (session, now):
            progress = self._progress(session, question_id)
            if progress.state is QuestionState.AWAITING_INITIAL:
                raise OrderViolation("an initial answer is required before a final answer")
            if progress.state is QuestionState.FINALIZED:
                # resubmission before close: keep the prior final, mark the reopen
                stream = self.store.load_trace(session_id, question_id)
                prior = max((e.seq for e in stream if e.kind is EventKind.FINAL_ANSWER),
                            default=None)
                self._append(session, question_id, EventKind.REVISION,
                             {"supersedes_seq": prior}, now)
                progress.state = QuestionState.EXPLORING
            event = self._append(session, question_id, EventKind.FINAL_ANSWER,
                                 {"text": text}, now)
            progress.state = QuestionState.FINALIZED
            return event

    # -- helpers ---------------------------------------------------------------

    @contextmanager
    def _op(self, session_id: str, now: datetime):
        session = self._sessions.get(session_id)
        if session is None:
            raise UnknownSession(f"no session {session_id!r}")
        effective = truncate_ms(now)
        if effective >= self.exam.closes_at:
            raise ExamClosed("the exam window has closed")
        if effective < self.exam.opens_at:
            raise ExamNotOpen("the exam has not opened yet")
        with self._locks[session_id]:
            yield session, effective

    def _progress(self, session: Session, question_id: str) -> QuestionProgress:
        progress = session.per_question.get(question_id)
        if progress is None:
            raise UnknownEvent(f"exam has no question {question_id!r}")
        return progress

    def _enabled_tool(self, question, tool_id: str, required_kind: ToolKind):
        policy = question.policy_for(tool_id)
        if policy is None or not policy.enabled:
            raise ToolDisabled(f"tool {tool_id!r} is not enabled for this question")
        tool = self.exam.tool(tool_id)
        if tool is None:
            raise ToolDisabled(f"tool {tool_id!r} is not in the exam registry")
        if tool.kind is not required_kind:
            raise WrongToolKind(f"tool {tool_id!r} is a {tool.kind.value}, "
                                f"this operation needs a {required_kind.value}")
        return policy, tool

    def _history(self, session_id: str, question_id: str,
                 tool_id: str) -> list[tuple[str, str]]:
        history: list[tuple[str, str]] = []
        for event in self.store.load_trace(session_id, question_id):
            if event.payload.get("tool_id") != tool_id:
                continue
            if event.kind is EventKind.AI_PROMPT:
                history.append(("student", event.payload["text"]))
            elif event.kind is EventKind.AI_RESPONSE:
                history.append(("assistant", event.payload["text"]))
        return history

    def _append(self, session: Session, question_id: str | None,
                kind: EventKind, payload: dict, now: datetime) -> TraceEvent:
        # timestamps never decrease within a stream even if the caller's
        # clock does; seq conflicts (lost races) are retried once
        for attempt in (0, 1):
            seq = self.store.max_seq(session.session_id, question_id) + 1
            last = self.store.last_event(session.session_id, question_id)
            ts = max(now, last.ts) if last else now
            event = TraceEvent(session_id=session.session_id, question_id=question_id,
                               seq=seq, ts=ts, kind=kind, payload=payload)
            try:
                self.store.append_event(event)
            except SequenceConflict:
                if attempt:
                    raise
                continue
            if question_id is not None:
                session.per_question[question_id].event_count += 1
                if kind in TOOL_EVENT_KINDS:
                    session.per_question[question_id].tool_event_count += 1
            return event
        raise AssertionError("unreachable")
