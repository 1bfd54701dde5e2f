from __future__ import annotations

from datetime import datetime, timezone

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import minute
from mindexam.analytics import (
    analytics_summary,
    compute_indicators,
    confidence_band,
    overall_score,
    score_report,
    score_rubric,
)
from mindexam.domain import RUBRIC_DIMENSIONS, RubricDefinition, validate_exam_config
from mindexam.errors import InvalidTrace, LevelOutOfRange, UnknownExam, UnknownSession
from mindexam.events import EventKind, TraceEvent
from mindexam.fixtures import build_zero_trust_session, zero_trust_exam_config
from mindexam.session import SessionEngine
from mindexam.gateway import ProviderRegistry
from mindexam.tracestore import MemoryTraceStore, SessionMeta


def ev(seq, kind, ts, question_id="q1", **payload) -> TraceEvent:
    return TraceEvent(session_id="sess", question_id=question_id, seq=seq,
                      ts=ts, kind=kind, payload=payload)


def test_trace_without_tool_use():
    trace = [ev(1, EventKind.INITIAL_ANSWER, minute(0), text="guess"),
             ev(2, EventKind.FINAL_ANSWER, minute(10), text="answer")]
    ind = compute_indicators(trace)
    assert ind.prompt_count == 0
    assert ind.search_count == 0
    assert ind.time_to_first_prompt_s is None
    assert ind.explore_duration_s == 600.0
    assert ind.comment_coverage == 1.0  # vacuous: nothing went unexamined
    assert ind.mean_prompt_length == 0.0


def test_zero_trust_fixture_indicators():
    """Frozen expected values, derived by hand from the fixture wall clock:
    initial 18:32:22, prompts 18:32:24 / 18:47:46 (each with response and
    comment), final 18:58:05."""
    engine, session = build_zero_trust_session()
    trace = engine.store.load_trace(session.session_id, "q1")

    # independent oracle: plain timestamp arithmetic over the known log
    clock = lambda hms: datetime.strptime(f"2025-12-03 {hms}",  # noqa: E731
                                          "%Y-%m-%d %H:%M:%S").replace(tzinfo=timezone.utc)
    expected_ttfp = (clock("18:32:24") - clock("18:32:22")).total_seconds()
    expected_explore = (clock("18:58:05") - clock("18:32:22")).total_seconds()
    assert expected_ttfp == 2.0
    assert expected_explore == 1543.0

    ind = compute_indicators(trace)
    assert ind.prompt_count == 2
    assert ind.time_to_first_prompt_s == expected_ttfp
    assert ind.explore_duration_s == expected_explore
    assert ind.comment_coverage == 1.0


def test_extended_fixture_has_eight_prompts():
    engine, session = build_zero_trust_session(extended=True)
    ind = compute_indicators(engine.store.load_trace(session.session_id, "q1"))
    assert ind.prompt_count == 8
    assert ind.comment_coverage == pytest.approx(2 / 8)


def test_invalid_trace_names_the_invariant():
    trace = [ev(1, EventKind.AI_PROMPT, minute(0), tool_id="chat", text="hi")]
    with pytest.raises(InvalidTrace) as err:
        compute_indicators(trace)
    assert err.value.invariant == "initial-answer-first"


def test_indicators_are_pure(engine, session):
    engine.submit_initial_answer(session.session_id, "q1", "hmm", minute(2))
    engine.ask_ai(session.session_id, "q1", "chat", "one", minute(3))
    trace = engine.store.load_trace(session.session_id, "q1")
    first = compute_indicators(trace)
    # another student's session must not change this one's indicators
    other = engine.open_session("s2", "exam-1", minute(4))
    engine.submit_initial_answer(other.session_id, "q1", "also hmm", minute(5))
    assert compute_indicators(trace) == first


def test_off_task_pairs_only():
    trace = [
        ev(1, EventKind.FOCUS_LOST, minute(0), question_id=None,
           active_question_id="q1", client_ts=None),
        ev(2, EventKind.FOCUS_REGAINED, minute(1), question_id=None,
           active_question_id="q1", client_ts=None),
        ev(3, EventKind.FOCUS_LOST, minute(2), question_id=None,
           active_question_id=None, client_ts=None),  # never regained
    ]
    ind = compute_indicators(trace)
    assert ind.off_task_count == 2
    assert ind.off_task_total_s == 60.0


def test_comment_coverage_counts_linked_responses(engine, session):
    sid = session.session_id
    engine.submit_initial_answer(sid, "q1", "hmm", minute(2))
    _, r1 = engine.ask_ai(sid, "q1", "chat", "one", minute(3))
    engine.ask_ai(sid, "q1", "chat", "two", minute(4))
    engine.comment_on_output(sid, "q1", r1.seq, "suspicious", minute(5))
    ind = compute_indicators(engine.store.load_trace(sid, "q1"))
    assert ind.comment_coverage == 0.5
    assert ind.mean_prompt_length == pytest.approx(3.0)


# rubric math

@pytest.fixture
def scoring_store():
    store = MemoryTraceStore()
    store.register_session(SessionMeta("sess", "exam-1", "s1"))
    return store


def levels_of(values) -> dict[str, int]:
    return dict(zip(RUBRIC_DIMENSIONS, values))


def test_all_top_levels_score_high(scoring_store):
    score = score_rubric(scoring_store, "sess", "q1", levels_of([4] * 5),
                         RubricDefinition(), "inst1")
    assert score.overall == pytest.approx(4.0, abs=1e-9)
    assert score.band == "high"


def test_all_zero_levels_score_low(scoring_store):
    score = score_rubric(scoring_store, "sess", "q1", levels_of([0] * 5),
                         RubricDefinition(), "inst1")
    assert score.overall == pytest.approx(0.0, abs=1e-9)
    assert score.band == "low"


def test_weighted_mean_example(scoring_store):
    score = score_rubric(scoring_store, "sess", "q1", levels_of([3, 2, 4, 1, 2]),
                         RubricDefinition(), "inst1")
    assert score.overall == pytest.approx(2.4, abs=1e-9)
    assert score.band == "medium"


def test_band_thresholds():
    assert confidence_band(1.4999999) == "low"
    assert confidence_band(1.5) == "medium"
    assert confidence_band(2.9999999) == "medium"
    assert confidence_band(3.0) == "high"


def test_level_out_of_range(scoring_store):
    with pytest.raises(LevelOutOfRange):
        score_rubric(scoring_store, "sess", "q1", levels_of([5, 0, 0, 0, 0]),
                     RubricDefinition(), "inst1")
    with pytest.raises(LevelOutOfRange):
        score_rubric(scoring_store, "sess", "q1", levels_of([-1, 0, 0, 0, 0]),
                     RubricDefinition(), "inst1")
    with pytest.raises(LevelOutOfRange):
        score_rubric(scoring_store, "sess", "q1",
                     {**levels_of([0] * 5), "creativity": 2},
                     RubricDefinition(), "inst1")


def test_scoring_unknown_session():
    with pytest.raises(UnknownSession):
        score_rubric(MemoryTraceStore(), "ghost", "q1", levels_of([1] * 5),
                     RubricDefinition(), "inst1")


def test_rescoring_appends(scoring_store):
    score_rubric(scoring_store, "sess", "q1", levels_of([1] * 5),
                 RubricDefinition(), "inst1", notes="first pass")
    score_rubric(scoring_store, "sess", "q1", levels_of([2] * 5),
                 RubricDefinition(), "inst1", notes="after moderation")
    records = scoring_store.scores("sess", "q1")
    assert [r["notes"] for r in records] == ["first pass", "after moderation"]


weights_strategy = st.lists(
    st.floats(min_value=0.01, max_value=1.0), min_size=5, max_size=5
).map(lambda ws: tuple(w / sum(ws) for w in ws))

levels_strategy = st.lists(st.integers(min_value=0, max_value=4),
                           min_size=5, max_size=5)


@settings(max_examples=250, deadline=None)
@given(weights=weights_strategy, levels=levels_strategy,
       perm=st.permutations(range(5)))
def test_overall_invariant_under_consistent_permutation(weights, levels, perm):
    rubric = RubricDefinition(weights=weights)
    baseline = overall_score(levels_of(levels), rubric)
    permuted_rubric = RubricDefinition(weights=tuple(weights[p] for p in perm))
    permuted_levels = levels_of([levels[p] for p in perm])
    assert overall_score(permuted_levels, permuted_rubric) == pytest.approx(
        baseline, abs=1e-9)


@settings(max_examples=250, deadline=None)
@given(weights=weights_strategy, levels=levels_strategy,
       bump=st.integers(min_value=0, max_value=4))
def test_overall_strictly_monotone_in_each_level(weights, levels, bump):
    if levels[bump] == 4:
        levels = list(levels)
        levels[bump] = 3
    rubric = RubricDefinition(weights=weights)
    lower = overall_score(levels_of(levels), rubric)
    raised = list(levels)
    raised[bump] += 1
    assert overall_score(levels_of(raised), rubric) > lower


# summary and report

@pytest.fixture
def populated_exam():
    exam_doc = zero_trust_exam_config()
    exam_doc["students"] = ["student-zt", "student-absent"]
    exam = validate_exam_config(exam_doc)
    store = MemoryTraceStore()
    providers = ProviderRegistry()
    from mindexam.fixtures import ScriptedChatProvider, ZT_ANSWER_1, ZT_ANSWER_2
    providers.register_chat("scripted", ScriptedChatProvider([ZT_ANSWER_1, ZT_ANSWER_2]))
    engine = SessionEngine(exam, store, providers)
    from mindexam.fixtures import ZT_INITIAL, ZT_PROMPT_1, ZT_FINAL, _utc
    session = engine.open_session("student-zt", exam.exam_id, _utc("2025-12-03", "18:30:00"))
    engine.submit_initial_answer(session.session_id, "q1", ZT_INITIAL,
                                 _utc("2025-12-03", "18:32:22"))
    engine.ask_ai(session.session_id, "q1", "chat-ai", ZT_PROMPT_1,
                  _utc("2025-12-03", "18:32:24"))
    engine.record_focus_event(session.session_id, EventKind.FOCUS_LOST,
                              _utc("2025-12-03", "18:33:00"), active_question_id="q1")
    engine.record_focus_event(session.session_id, EventKind.FOCUS_REGAINED,
                              _utc("2025-12-03", "18:33:30"))
    engine.submit_final_answer(session.session_id, "q1", ZT_FINAL,
                               _utc("2025-12-03", "18:58:05"))
    return exam, store, session


def test_summary_flags_absent_students(populated_exam):
    exam, store, session = populated_exam
    rows = analytics_summary(exam.exam_id, {exam.exam_id: exam}, store)
    by_student = {r.student_id: r for r in rows}
    assert by_student["student-zt"].status == "present"
    assert by_student["student-zt"].session_id == session.session_id
    assert by_student["student-zt"].per_question["q1"].prompt_count == 1
    assert by_student["student-zt"].off_task_count == 1
    assert by_student["student-zt"].off_task_total_s == 30.0
    assert by_student["student-absent"].status == "absent"
    assert by_student["student-absent"].session_id is None


def test_summary_unknown_exam():
    with pytest.raises(UnknownExam):
        analytics_summary("ghost", {}, MemoryTraceStore())


def test_score_report_one_row_per_student_question(populated_exam):
    exam, store, session = populated_exam
    score_rubric(store, session.session_id, "q1", levels_of([1] * 5),
                 RubricDefinition(), "instructor-1")
    score_rubric(store, session.session_id, "q1", levels_of([3, 2, 4, 1, 2]),
                 RubricDefinition(), "instructor-1")
    report = score_report(exam.exam_id, {exam.exam_id: exam}, store)
    lines = report.splitlines()
    header = lines[0].split("\t")
    assert header[0] == "exam_id"
    assert "comment_coverage" in header
    rows = {line.split("\t")[1]: line.split("\t") for line in lines[1:]}
    present = dict(zip(header, rows["student-zt"]))
    assert present["prompt_count"] == "1"
    assert present["overall"] == "2.400"  # the latest score wins
    assert present["band"] == "medium"
    absent = dict(zip(header, rows["student-absent"]))
    assert absent["session_id"] == ""
    assert absent["overall"] == ""
