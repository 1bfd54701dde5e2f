"""Trace event records and their canonical wire form.

One event is one line in the exported trace document. Canonical form is
compact JSON with sorted keys and RFC 3339 UTC timestamps at millisecond
precision, so export -> import -> export is byte-identical.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .errors import SchemaViolation

SCHEMA_VERSION = 1


class EventKind(str, Enum):
    INITIAL_ANSWER = "initial_answer"
    INITIAL_ANSWER_EDIT = "initial_answer_edit"
    AI_PROMPT = "ai_prompt"
    AI_RESPONSE = "ai_response"
    AI_COMMENT = "ai_comment"
    SEARCH_QUERY = "search_query"
    SEARCH_RESULTS = "search_results"
    TOOL_ERROR = "tool_error"
    FOCUS_LOST = "focus_lost"
    FOCUS_REGAINED = "focus_regained"
    REVISION = "revision"
    FINAL_ANSWER = "final_answer"


TOOL_EVENT_KINDS = frozenset({
    EventKind.AI_PROMPT, EventKind.AI_RESPONSE, EventKind.SEARCH_QUERY,
    EventKind.SEARCH_RESULTS, EventKind.TOOL_ERROR,
})

FOCUS_EVENT_KINDS = frozenset({EventKind.FOCUS_LOST, EventKind.FOCUS_REGAINED})

_TS_RE = re.compile(r"^\d{4}-\d{2}-\d{2}T\d{2}:\d{2}:\d{2}\.\d{3}Z$")


def truncate_ms(dt: datetime) -> datetime:
    """Clamp to UTC and drop sub-millisecond precision."""
    dt = dt.astimezone(timezone.utc)
    return dt.replace(microsecond=(dt.microsecond // 1000) * 1000)


def format_ts(dt: datetime) -> str:
    dt = truncate_ms(dt)
    return dt.strftime("%Y-%m-%dT%H:%M:%S.") + f"{dt.microsecond // 1000:03d}Z"


def parse_ts(text: str) -> datetime:
    if not isinstance(text, str) or not _TS_RE.match(text):
        raise SchemaViolation(f"timestamp must be RFC 3339 UTC with milliseconds, got {text!r}")
    return datetime.strptime(text, "%Y-%m-%dT%H:%M:%S.%fZ").replace(tzinfo=timezone.utc)


@dataclass(frozen=True)
class TraceEvent:
    """One time-stamped entry in an append-only reasoning trace.

    ``question_id`` is None for session-scope events (focus telemetry);
    ``seq`` numbers each (session, question) stream gaplessly from 1.
    """

    session_id: str
    question_id: str | None
    seq: int
    ts: datetime
    kind: EventKind
    payload: dict[str, Any]

    def to_wire(self) -> dict[str, Any]:
        return {
            "seq": self.seq,
            "ts": format_ts(self.ts),
            "kind": self.kind.value,
            "question_id": self.question_id,
            "payload": self.payload,
        }

    def to_line(self) -> str:
        return canonical_json(self.to_wire())


def canonical_json(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":"))


_REQUIRED_FIELDS = ("seq", "ts", "kind", "question_id", "payload")


def event_from_wire(session_id: str, obj: Any, line: int | None = None) -> TraceEvent:
    """Parse one event record; raises SchemaViolation naming the line."""
    if not isinstance(obj, dict):
        raise SchemaViolation("event record must be an object", line)
    for name in _REQUIRED_FIELDS:
        if name not in obj:
            raise SchemaViolation(f"event record missing field {name!r}", line)
    seq = obj["seq"]
    if not isinstance(seq, int) or isinstance(seq, bool) or seq < 1:
        raise SchemaViolation("seq must be a positive integer", line)
    try:
        ts = parse_ts(obj["ts"])
    except SchemaViolation as exc:
        raise SchemaViolation(exc.reason, line) from None
    try:
        kind = EventKind(obj["kind"])
    except ValueError:
        raise SchemaViolation(f"unknown event kind {obj['kind']!r}", line) from None
    question_id = obj["question_id"]
    if question_id is not None and not isinstance(question_id, str):
        raise SchemaViolation("question_id must be text or null", line)
    payload = obj["payload"]
    if not isinstance(payload, dict):
        raise SchemaViolation("payload must be an object", line)
    return TraceEvent(session_id=session_id, question_id=question_id,
                      seq=seq, ts=ts, kind=kind, payload=payload)


def merged_order_key(event: TraceEvent) -> tuple:
    """Global ordering: timestamp, then seq, then stream id (None first)."""
    return (event.ts, event.seq, event.question_id is not None, event.question_id or "")
