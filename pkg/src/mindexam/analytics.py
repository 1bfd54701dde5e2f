"""Interaction indicators computed from traces, rubric score aggregation,
and the instructor analytics summary.

Indicators are the computable precursors of critical-thinking signals
(verification behavior via comment coverage, revision depth, time budgets).
Rubric levels are always assigned by the instructor; nothing here grades
answer correctness or prompt quality automatically.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from typing import Mapping

from .domain import Exam, RubricDefinition
from .errors import InvalidTrace, InvariantViolation, LevelOutOfRange, UnknownExam
from .events import EventKind, TraceEvent, format_ts
from .session import check_stream_invariants
from .tracestore import MemoryTraceStore

BAND_MEDIUM_AT = 1.5
BAND_HIGH_AT = 3.0


@dataclass(frozen=True)
class Indicators:
    prompt_count: int
    search_count: int
    mean_prompt_length: float  # characters; 0.0 when there are no prompts
    time_to_first_prompt_s: float | None
    explore_duration_s: float | None  # first initial answer -> last final answer
    revision_count: int
    comment_coverage: float  # fraction of AI responses with a linked comment; 0/0 -> 1
    off_task_count: int
    off_task_total_s: float  # paired lost/regained intervals only


def compute_indicators(trace: list[TraceEvent]) -> Indicators:
    """Pure function of the trace; accepts per-question streams, the
    session-scope focus stream, or a merged session trace."""
    try:
        check_stream_invariants(trace)
    except InvariantViolation as exc:
        raise InvalidTrace(exc.invariant, exc.message) from None

    prompts = [e for e in trace if e.kind is EventKind.AI_PROMPT]
    responses = [e for e in trace if e.kind is EventKind.AI_RESPONSE]
    comments = [e for e in trace if e.kind is EventKind.AI_COMMENT]
    searches = [e for e in trace if e.kind is EventKind.SEARCH_QUERY]
    revisions = [e for e in trace if e.kind is EventKind.REVISION]
    initials = [e for e in trace if e.kind is EventKind.INITIAL_ANSWER]
    finals = [e for e in trace if e.kind is EventKind.FINAL_ANSWER]

    first_initial = min((e.ts for e in initials), default=None)
    time_to_first_prompt = None
    if prompts and first_initial is not None:
        time_to_first_prompt = (min(e.ts for e in prompts) - first_initial).total_seconds()
    explore_duration = None
    if finals and first_initial is not None:
        explore_duration = (max(e.ts for e in finals) - first_initial).total_seconds()

    mean_prompt_length = 0.0
    if prompts:
        mean_prompt_length = sum(len(e.payload.get("text", "")) for e in prompts) / len(prompts)

    # events link within their own stream, so pair responses by (question, seq)
    commented = {(e.question_id, e.payload.get("linked_seq")) for e in comments}
    if responses:
        covered = sum(1 for e in responses if (e.question_id, e.seq) in commented)
        comment_coverage = covered / len(responses)
    else:
        comment_coverage = 1.0  # vacuously covered: no responses went unexamined

    off_task_count = 0
    off_task_total = 0.0
    lost_at: datetime | None = None
    for event in trace:
        if event.kind is EventKind.FOCUS_LOST:
            off_task_count += 1
            if lost_at is None:
                lost_at = event.ts
        elif event.kind is EventKind.FOCUS_REGAINED and lost_at is not None:
            off_task_total += (event.ts - lost_at).total_seconds()
            lost_at = None

    return Indicators(
        prompt_count=len(prompts),
        search_count=len(searches),
        mean_prompt_length=mean_prompt_length,
        time_to_first_prompt_s=time_to_first_prompt,
        explore_duration_s=explore_duration,
        revision_count=len(revisions),
        comment_coverage=comment_coverage,
        off_task_count=off_task_count,
        off_task_total_s=off_task_total,
    )


# --------------------------------------------------------------------------
# Rubric scoring
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class RubricScore:
    levels: dict[str, int]
    weights: tuple[float, ...]
    overall: float
    band: str  # low | medium | high
    assessor_id: str
    notes: str
    scored_at: datetime

    def to_record(self) -> dict:
        return {
            "levels": dict(self.levels),
            "weights": list(self.weights),
            "overall": self.overall,
            "band": self.band,
            "assessor_id": self.assessor_id,
            "notes": self.notes,
            "scored_at": format_ts(self.scored_at),
        }


def overall_score(levels: Mapping[str, int], rubric: RubricDefinition) -> float:
    return sum(w * levels[dim] for dim, w in zip(rubric.dimensions, rubric.weights))


def confidence_band(overall: float) -> str:
    if overall < BAND_MEDIUM_AT:
        return "low"
    if overall < BAND_HIGH_AT:
        return "medium"
    return "high"


def score_rubric(store: MemoryTraceStore, session_id: str, question_id: str,
                 levels: Mapping[str, int], rubric: RubricDefinition,
                 assessor_id: str, notes: str = "",
                 scored_at: datetime | None = None) -> RubricScore:
    """Attach an instructor-assigned rubric score to a trace.

    Levels are integers in [0, levels_per_dimension - 1], one per dimension.
    Rescoring appends another record; earlier scores are never overwritten.
    """
    store.get_session(session_id)  # UnknownSession if absent
    top = rubric.levels_per_dimension - 1
    for dim in rubric.dimensions:
        value = levels.get(dim)
        if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value <= top:
            raise LevelOutOfRange(
                f"{dim} must be an integer in [0, {top}], got {value!r}")
    extra = set(levels) - set(rubric.dimensions)
    if extra:
        raise LevelOutOfRange(f"unknown dimensions: {', '.join(sorted(extra))}")
    overall = overall_score(levels, rubric)
    score = RubricScore(
        levels={dim: levels[dim] for dim in rubric.dimensions},
        weights=tuple(rubric.weights),
        overall=overall,
        band=confidence_band(overall),
        assessor_id=assessor_id,
        notes=notes,
        scored_at=scored_at or datetime.now(timezone.utc),
    )
    store.append_score(session_id, question_id, score.to_record())
    return score


# --------------------------------------------------------------------------
# Instructor summary
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class StudentRow:
    student_id: str
    status: str  # present | absent
    session_id: str | None
    per_question: dict[str, Indicators]
    off_task_count: int
    off_task_total_s: float
    scores: list[dict]  # stored rubric records, each tagged with question_id


def analytics_summary(exam_id: str, exams: Mapping[str, Exam],
                      store: MemoryTraceStore) -> list[StudentRow]:
    """One row per enrolled student; students without a session are Absent.

    Per-question indicators come from each question stream; focus telemetry
    is session-scope and reported at the row level.
    """
    exam = exams.get(exam_id)
    if exam is None:
        raise UnknownExam(f"no exam {exam_id!r}")
    by_student = {m.student_id: m for m in store.sessions_for_exam(exam_id)}
    rows: list[StudentRow] = []
    for student_id in sorted(exam.enrolled_students):
        meta = by_student.get(student_id)
        if meta is None:
            rows.append(StudentRow(student_id=student_id, status="absent",
                                   session_id=None, per_question={},
                                   off_task_count=0, off_task_total_s=0.0, scores=[]))
            continue
        per_question = {
            q.question_id: compute_indicators(
                store.load_trace(meta.session_id, q.question_id))
            for q in exam.questions
        }
        focus = compute_indicators(store.load_trace(meta.session_id, None))
        rows.append(StudentRow(
            student_id=student_id, status="present", session_id=meta.session_id,
            per_question=per_question,
            off_task_count=focus.off_task_count,
            off_task_total_s=focus.off_task_total_s,
            scores=store.scores(meta.session_id)))
    return rows


# --------------------------------------------------------------------------
# Score report export
# --------------------------------------------------------------------------

REPORT_COLUMNS = (
    "exam_id", "student_id", "session_id", "question_id",
    "prompt_count", "search_count", "mean_prompt_length",
    "time_to_first_prompt_s", "explore_duration_s", "revision_count",
    "comment_coverage", "off_task_count", "off_task_total_s",
    "understanding", "reasoning", "independence", "improvement_over_time",
    "recall_from_class_discussions", "overall", "band", "assessor_id",
)


def _cell(value) -> str:
    if value is None:
        return ""
    if isinstance(value, float):
        return f"{value:.3f}"
    return str(value)


def score_report(exam_id: str, exams: Mapping[str, Exam],
                 store: MemoryTraceStore) -> str:
    """Tab-separated report, one row per student-question, columns fixed
    (REPORT_COLUMNS). The latest rubric score per question wins."""
    exam = exams.get(exam_id)
    if exam is None:
        raise UnknownExam(f"no exam {exam_id!r}")
    lines = ["\t".join(REPORT_COLUMNS)]
    for row in analytics_summary(exam_id, exams, store):
        latest: dict[str, dict] = {}
        for record in row.scores:  # append order; last one per question wins
            latest[record["question_id"]] = record
        for question in exam.questions:
            qid = question.question_id
            ind = row.per_question.get(qid)
            score = latest.get(qid)
            cells = [
                exam_id, row.student_id, row.session_id, qid,
                ind.prompt_count if ind else None,
                ind.search_count if ind else None,
                ind.mean_prompt_length if ind else None,
                ind.time_to_first_prompt_s if ind else None,
                ind.explore_duration_s if ind else None,
                ind.revision_count if ind else None,
                ind.comment_coverage if ind else None,
                row.off_task_count if row.status == "present" else None,
                row.off_task_total_s if row.status == "present" else None,
            ]
            if score:
                cells.extend(score["levels"][dim] for dim in RubricDefinition().dimensions)
                cells.extend([score["overall"], score["band"], score["assessor_id"]])
            else:
                cells.extend([None] * 8)
            lines.append("\t".join(_cell(c) for c in cells))
    return "\n".join(lines) + "\n"
