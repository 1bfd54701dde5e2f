#!/usr/bin/env python3
"""Replay the bundled zero-trust session, print its timeline and indicators,
attach a rubric score, and emit the tab-separated score report."""

from __future__ import annotations

import dataclasses

from mindexam.analytics import compute_indicators, score_report, score_rubric
from mindexam.domain import RUBRIC_DIMENSIONS, RubricDefinition, validate_exam_config
from mindexam.fixtures import build_zero_trust_session, zero_trust_exam_config
from mindexam.tracestore import export_trace


def main() -> None:
    engine, session = build_zero_trust_session()
    store = engine.store
    trace = store.load_trace(session.session_id, "q1")

    print(f"== timeline (session {session.session_id}, question q1) ==")
    for event in trace:
        summary = event.payload.get("text", "")
        summary = summary.replace("\n", " ")[:72]
        print(f"  {event.seq:>2}  {event.ts.strftime('%H:%M:%S')}  "
              f"{event.kind.value:<20} {summary}")

    print("\n== indicators ==")
    indicators = compute_indicators(trace)
    for field, value in dataclasses.asdict(indicators).items():
        print(f"  {field:<24} {value}")

    print("\n== rubric ==")
    levels = dict(zip(RUBRIC_DIMENSIONS, [3, 4, 4, 3, 4]))
    score = score_rubric(store, session.session_id, "q1", levels,
                         RubricDefinition(), "instructor-1",
                         notes="strong verification behavior")
    print(f"  overall {score.overall:.2f}  band {score.band}")

    exam = validate_exam_config(zero_trust_exam_config())
    print("\n== score report ==")
    print(score_report(exam.exam_id, {exam.exam_id: exam}, store), end="")

    print("\n== export (first two lines) ==")
    document = export_trace(store, session.session_id)
    for line in document.splitlines()[:2]:
        print(f"  {line[:100]}{'...' if len(line) > 100 else ''}")


if __name__ == "__main__":
    main()
