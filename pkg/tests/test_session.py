from __future__ import annotations

import pytest

from conftest import CLOSES, minute
from mindexam.errors import (
    ExamClosed,
    ExamNotOpen,
    NotEnrolled,
    OrderViolation,
    ProviderError,
    SessionExists,
    ToolDisabled,
    UnknownEvent,
    WrongKind,
    WrongToolKind,
)
from mindexam.events import EventKind
from mindexam.gateway import ProviderRegistry
from mindexam.session import QuestionState, SessionEngine, replay_question


def stream(engine, session, question_id="q1"):
    return engine.store.load_trace(session.session_id, question_id)


# open_session

def test_open_session_starts_awaiting_initial(engine):
    session = engine.open_session("s1", "exam-1", minute(1))
    assert all(p.state is QuestionState.AWAITING_INITIAL
               for p in session.per_question.values())
    assert len(session.access_token) >= 32  # >= 128 bits entropy, urlsafe


def test_open_session_requires_enrollment(engine):
    with pytest.raises(NotEnrolled):
        engine.open_session("intruder", "exam-1", minute(1))


def test_open_session_outside_window(engine):
    with pytest.raises(ExamNotOpen):
        engine.open_session("s1", "exam-1", minute(-5))
    with pytest.raises(ExamClosed):
        engine.open_session("s1", "exam-1", CLOSES)


def test_second_open_returns_original_session_id(engine, session):
    with pytest.raises(SessionExists) as err:
        engine.open_session("s1", "exam-1", minute(2))
    assert err.value.session_id == session.session_id


# initial answers

def test_i_dont_know_is_accepted(engine, session):
    event = engine.submit_initial_answer(session.session_id, "q1",
                                         "I don't know", minute(2))
    assert event.kind is EventKind.INITIAL_ANSWER
    assert event.payload["text"] == "I don't know"
    assert session.per_question["q1"].state is QuestionState.EXPLORING


def test_initial_edit_before_tools_preserves_original(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "first guess", minute(2))
    edit = engine.submit_initial_answer(session.session_id, "q1",
                                        "second guess", minute(3))
    assert edit.kind is EventKind.INITIAL_ANSWER_EDIT
    events = stream(engine, session)
    assert [e.payload["text"] for e in events] == ["first guess", "second guess"]


def test_initial_edit_after_tool_use_rejected(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "guess", minute(2))
    engine.ask_ai(session.session_id, "q1", "chat", "help?", minute(3))
    with pytest.raises(OrderViolation):
        engine.submit_initial_answer(session.session_id, "q1", "revised", minute(4))


# tool use ordering

def test_prompt_before_initial_rejected_and_unlogged(engine, session):
    with pytest.raises(OrderViolation):
        engine.ask_ai(session.session_id, "q1", "chat", "spoil it", minute(2))
    assert stream(engine, session) == []


def test_first_exchange_gets_seq_2_and_3(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    prompt, response = engine.ask_ai(session.session_id, "q1", "chat",
                                     "why stateful?", minute(3))
    assert (prompt.seq, response.seq) == (2, 3)
    assert prompt.kind is EventKind.AI_PROMPT
    assert response.kind is EventKind.AI_RESPONSE
    assert response.payload["linked_seq"] == prompt.seq


def test_disabled_tool_rejected(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    with pytest.raises(ToolDisabled):
        engine.ask_ai(session.session_id, "q1", "chat-off", "hi", minute(3))
    with pytest.raises(ToolDisabled):
        engine.ask_ai(session.session_id, "q1", "nonexistent", "hi", minute(3))


def test_tool_kind_enforced_per_operation(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    with pytest.raises(WrongToolKind):
        engine.ask_ai(session.session_id, "q1", "search", "hi", minute(3))
    with pytest.raises(WrongToolKind):
        engine.run_search(session.session_id, "q1", "chat", "hi", minute(3))


def test_search_logs_query_then_results(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    query, results = engine.run_search(session.session_id, "q1", "search",
                                       "tcp teardown", minute(3), limit=2)
    assert query.kind is EventKind.SEARCH_QUERY
    assert results.kind is EventKind.SEARCH_RESULTS
    assert results.payload["linked_seq"] == query.seq
    assert [r["rank"] for r in results.payload["results"]] == [1, 2]


def test_provider_failure_logs_prompt_then_tool_error(exam, store):
    class Failing:
        def complete(self, request):
            raise ProviderError("503", "upstream down")

    providers = ProviderRegistry()
    providers.register_chat("mock", Failing())
    engine = SessionEngine(exam, store, providers)
    session = engine.open_session("s1", "exam-1", minute(1))
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    prompt, error = engine.ask_ai(session.session_id, "q1", "chat", "hi", minute(3))
    assert prompt.kind is EventKind.AI_PROMPT
    assert error.kind is EventKind.TOOL_ERROR
    assert error.payload["linked_seq"] == prompt.seq
    assert error.payload["error_code"] == "503"
    # the failed attempt stays visible in the trace
    assert [e.kind for e in stream(engine, session)] == [
        EventKind.INITIAL_ANSWER, EventKind.AI_PROMPT, EventKind.TOOL_ERROR]


# comments

def test_comment_logged_verbatim(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    _, response = engine.ask_ai(session.session_id, "q1", "chat", "hi", minute(3))
    text = "Impossible that AI isn't wrong here. Makes no sense at all."
    comment = engine.comment_on_output(session.session_id, "q1",
                                       response.seq, text, minute(4))
    assert comment.kind is EventKind.AI_COMMENT
    assert comment.payload == {"linked_seq": response.seq, "text": text}


def test_comment_on_prompt_is_wrong_kind(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    prompt, _ = engine.ask_ai(session.session_id, "q1", "chat", "hi", minute(3))
    with pytest.raises(WrongKind):
        engine.comment_on_output(session.session_id, "q1", prompt.seq, "?", minute(4))


def test_comment_on_missing_seq_is_unknown_event(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    with pytest.raises(UnknownEvent):
        engine.comment_on_output(session.session_id, "q1", 99, "?", minute(3))


def test_comment_still_allowed_after_final(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    _, response = engine.ask_ai(session.session_id, "q1", "chat", "hi", minute(3))
    engine.submit_final_answer(session.session_id, "q1", "done", minute(4))
    comment = engine.comment_on_output(session.session_id, "q1",
                                       response.seq, "late note", minute(5))
    assert comment.kind is EventKind.AI_COMMENT


# focus telemetry

def test_focus_events_are_session_scoped(engine, session):
    lost = engine.record_focus_event(session.session_id, EventKind.FOCUS_LOST,
                                     minute(2), active_question_id="q1")
    regained = engine.record_focus_event(session.session_id,
                                         EventKind.FOCUS_REGAINED, minute(3))
    assert lost.question_id is None and regained.question_id is None
    assert lost.payload["active_question_id"] == "q1"
    assert (lost.seq, regained.seq) == (1, 2)
    assert lost.ts <= regained.ts


def test_unpaired_focus_regained_is_accepted(engine, session):
    event = engine.record_focus_event(session.session_id,
                                      EventKind.FOCUS_REGAINED, minute(2))
    assert event.kind is EventKind.FOCUS_REGAINED


def test_focus_after_close_rejected(engine, session):
    with pytest.raises(ExamClosed):
        engine.record_focus_event(session.session_id, EventKind.FOCUS_LOST, CLOSES)


# final answers

def test_final_answer_finalizes(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    event = engine.submit_final_answer(session.session_id, "q1", "answer", minute(5))
    assert event.kind is EventKind.FINAL_ANSWER
    assert session.per_question["q1"].state is QuestionState.FINALIZED


def test_resubmission_keeps_prior_final_and_marks_revision(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    first = engine.submit_final_answer(session.session_id, "q1", "v1", minute(5))
    engine.submit_final_answer(session.session_id, "q1", "v2", minute(6))
    kinds = [e.kind for e in stream(engine, session)]
    assert kinds[-3:] == [EventKind.FINAL_ANSWER, EventKind.REVISION,
                          EventKind.FINAL_ANSWER]
    revision = stream(engine, session)[-2]
    assert revision.payload["supersedes_seq"] == first.seq
    texts = [e.payload["text"] for e in stream(engine, session)
             if e.kind is EventKind.FINAL_ANSWER]
    assert texts == ["v1", "v2"]


def test_final_without_initial_rejected(engine, session):
    with pytest.raises(OrderViolation):
        engine.submit_final_answer(session.session_id, "q1", "answer", minute(2))


# exam close freezes everything

def test_all_operations_rejected_after_close(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    before = len(stream(engine, session))
    operations = [
        lambda: engine.submit_initial_answer(session.session_id, "q1", "x", CLOSES),
        lambda: engine.ask_ai(session.session_id, "q1", "chat", "x", CLOSES),
        lambda: engine.run_search(session.session_id, "q1", "search", "x", CLOSES),
        lambda: engine.comment_on_output(session.session_id, "q1", 1, "x", CLOSES),
        lambda: engine.record_focus_event(session.session_id,
                                          EventKind.FOCUS_LOST, CLOSES),
        lambda: engine.submit_final_answer(session.session_id, "q1", "x", CLOSES),
    ]
    for op in operations:
        with pytest.raises(ExamClosed):
            op()
    assert len(stream(engine, session)) == before


# timestamps and replay

def test_timestamps_clamped_monotone_per_stream(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(10))
    # caller clock stepping backwards must not produce decreasing timestamps
    prompt, _ = engine.ask_ai(session.session_id, "q1", "chat", "x", minute(5))
    events = stream(engine, session)
    assert prompt.ts == events[0].ts  # clamped up to the initial answer's time
    assert all(a.ts <= b.ts for a, b in zip(events, events[1:]))


def test_replay_reproduces_engine_state(engine, session):
    sid = session.session_id
    engine.submit_initial_answer(sid, "q1", "hmm", minute(2))
    _, response = engine.ask_ai(sid, "q1", "chat", "x", minute(3))
    engine.comment_on_output(sid, "q1", response.seq, "ok", minute(4))
    engine.submit_final_answer(sid, "q1", "v1", minute(5))
    engine.submit_final_answer(sid, "q1", "v2", minute(6))
    replayed = replay_question(stream(engine, session))
    progress = session.per_question["q1"]
    assert replayed.state is progress.state is QuestionState.FINALIZED
    assert replayed.event_count == progress.event_count
    assert replayed.tool_event_count == progress.tool_event_count


def test_engine_restores_sessions_from_store(exam, store):
    engine = SessionEngine(exam, store, ProviderRegistry())
    session = engine.open_session("s1", "exam-1", minute(1))
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    engine.submit_final_answer(session.session_id, "q1", "done", minute(5))

    rebuilt = SessionEngine(exam, store, ProviderRegistry())
    restored = rebuilt.get_session(session.session_id)
    assert restored is not None
    assert restored.per_question["q1"].state is QuestionState.FINALIZED
    with pytest.raises(SessionExists):
        rebuilt.open_session("s1", "exam-1", minute(6))


def test_history_passed_to_provider_is_per_tool(exam, store):
    captured = []

    class Recording:
        def complete(self, request):
            captured.append(request.conversation)
            from mindexam.gateway import mock_complete
            return mock_complete(request)

    providers = ProviderRegistry()
    providers.register_chat("mock", Recording())
    engine = SessionEngine(exam, store, providers)
    session = engine.open_session("s1", "exam-1", minute(1))
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    engine.ask_ai(session.session_id, "q1", "chat", "first", minute(3))
    engine.run_search(session.session_id, "q1", "search", "interlude", minute(4))
    engine.ask_ai(session.session_id, "q1", "chat", "second", minute(5))
    assert captured[0] == (("student", "first"),)
    assert captured[1] == (("student", "first"),
                           ("assistant", captured[1][1][1]),
                           ("student", "second"))
    assert captured[1][1][0] == "assistant"
