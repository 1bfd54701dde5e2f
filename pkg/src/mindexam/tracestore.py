"""Durable append-only persistence for sessions, trace events, and rubric
scores, plus the line-delimited export/import format.

Export format (UTF-8, one JSON record per line, sorted keys, compact):

    {"exam_id":...,"schema_version":1,"session_id":...,"student_id":...}
    {"kind":...,"payload":{...},"question_id":...,"seq":1,"ts":"...Z"}
    ...

The first line is the header; every following line is one event in the
merged order (timestamp, then seq, session-scope stream first). Export ->
import -> export is byte-identical. Empty documents are invalid: a session
always has at least its header, which distinguishes "no data" from "lost
data".
"""

from __future__ import annotations

import io
import json
import os
import threading
from dataclasses import dataclass
from datetime import datetime

from .errors import (
    InvariantViolation,
    SchemaViolation,
    SequenceConflict,
    StorageFailure,
    UnknownSession,
)
from .events import (
    SCHEMA_VERSION,
    TraceEvent,
    canonical_json,
    event_from_wire,
    format_ts,
    merged_order_key,
    parse_ts,
)
from .session import check_stream_invariants

# sentinel distinguishing "merge all streams" from the session-scope stream
ALL_STREAMS = object()


@dataclass(frozen=True)
class SessionMeta:
    session_id: str
    exam_id: str
    student_id: str
    access_token: str | None = None
    opened_at: datetime | None = None


class MemoryTraceStore:
    """In-memory store; the file-backed store layers durability on top."""

    def __init__(self):
        self._sessions: dict[str, SessionMeta] = {}
        self._streams: dict[tuple[str, str | None], list[TraceEvent]] = {}
        self._scores: dict[tuple[str, str], list[dict]] = {}
        self._lock = threading.Lock()

    # -- sessions -------------------------------------------------------------

    def register_session(self, meta: SessionMeta) -> None:
        with self._lock:
            if meta.session_id in self._sessions:
                raise SequenceConflict(f"session {meta.session_id!r} already registered")
            self._sessions[meta.session_id] = meta
            self._persist_session(meta)

    def has_session(self, session_id: str) -> bool:
        return session_id in self._sessions

    def get_session(self, session_id: str) -> SessionMeta:
        meta = self._sessions.get(session_id)
        if meta is None:
            raise UnknownSession(f"no session {session_id!r}")
        return meta

    def sessions(self) -> list[SessionMeta]:
        return list(self._sessions.values())

    def sessions_for_exam(self, exam_id: str) -> list[SessionMeta]:
        return [m for m in self._sessions.values() if m.exam_id == exam_id]

    # -- events ----------------------------------------------------------------

    def max_seq(self, session_id: str, question_id: str | None) -> int:
        stream = self._streams.get((session_id, question_id))
        return stream[-1].seq if stream else 0

    def last_event(self, session_id: str, question_id: str | None) -> TraceEvent | None:
        stream = self._streams.get((session_id, question_id))
        return stream[-1] if stream else None

    def append_event(self, event: TraceEvent) -> None:
        """Durably persist one record; seq must extend its stream by exactly 1."""
        with self._lock:
            if event.session_id not in self._sessions:
                raise UnknownSession(f"no session {event.session_id!r}")
            key = (event.session_id, event.question_id)
            stream = self._streams.setdefault(key, [])
            expected = (stream[-1].seq if stream else 0) + 1
            if event.seq != expected:
                raise SequenceConflict(
                    f"stream {key} expects seq {expected}, got {event.seq}")
            self._persist_event(event)
            stream.append(event)

    def load_trace(self, session_id: str,
                   question_id: str | None | object = ALL_STREAMS) -> list[TraceEvent]:
        """Records in seq order; all streams merged by timestamp when no
        question is given (seq breaks ties, session scope first)."""
        if not self.has_session(session_id):
            raise UnknownSession(f"no session {session_id!r}")
        if question_id is not ALL_STREAMS:
            return list(self._streams.get((session_id, question_id), []))
        merged: list[TraceEvent] = []
        for (sid, _), stream in self._streams.items():
            if sid == session_id:
                merged.extend(stream)
        return sorted(merged, key=merged_order_key)

    # -- rubric scores ------------------------------------------------------------

    def append_score(self, session_id: str, question_id: str, score: dict) -> None:
        """Scores are append-only; rescoring adds a record, never overwrites."""
        with self._lock:
            if session_id not in self._sessions:
                raise UnknownSession(f"no session {session_id!r}")
            self._persist_score(session_id, question_id, score)
            self._scores.setdefault((session_id, question_id), []).append(dict(score))

    def scores(self, session_id: str, question_id: str | None = None) -> list[dict]:
        if not self.has_session(session_id):
            raise UnknownSession(f"no session {session_id!r}")
        if question_id is not None:
            return [dict(s) for s in self._scores.get((session_id, question_id), [])]
        out = []
        for (sid, qid), rows in self._scores.items():
            if sid == session_id:
                out.extend({"question_id": qid, **row} for row in rows)
        return out

    # -- durability hooks (no-ops in memory) -----------------------------------

    def _persist_session(self, meta: SessionMeta) -> None:
        pass

    def _persist_event(self, event: TraceEvent) -> None:
        pass

    def _persist_score(self, session_id: str, question_id: str, score: dict) -> None:
        pass


class FileTraceStore(MemoryTraceStore):
    """Append-only JSONL files under a data directory.

    Every append is flushed and fsynced before it is acknowledged, so an
    acked write survives a crash. A torn trailing line (a write that was
    never acked) is skipped on reload; corruption anywhere else fails fast.
    """

    def __init__(self, data_dir: str | os.PathLike):
        super().__init__()
        self._dir = str(data_dir)
        os.makedirs(self._dir, exist_ok=True)
        self._paths = {
            "sessions": os.path.join(self._dir, "sessions.jsonl"),
            "events": os.path.join(self._dir, "events.jsonl"),
            "scores": os.path.join(self._dir, "scores.jsonl"),
        }
        self._load_all()
        self._files: dict[str, io.TextIOWrapper] = {
            name: open(path, "a", encoding="utf-8")
            for name, path in self._paths.items()
        }

    def close(self) -> None:
        for handle in self._files.values():
            handle.close()

    def _load_all(self) -> None:
        for row in self._read_lines("sessions"):
            meta = SessionMeta(
                session_id=row["session_id"], exam_id=row["exam_id"],
                student_id=row["student_id"],
                access_token=row.get("access_token"),
                opened_at=parse_ts(row["opened_at"]) if row.get("opened_at") else None)
            self._sessions[meta.session_id] = meta
        for row in self._read_lines("events"):
            event = event_from_wire(row["session_id"], row)
            self._streams.setdefault(
                (event.session_id, event.question_id), []).append(event)
        for row in self._read_lines("scores"):
            self._scores.setdefault(
                (row["session_id"], row["question_id"]), []).append(row["score"])

    def _read_lines(self, name: str) -> list[dict]:
        path = self._paths[name]
        if not os.path.exists(path):
            return []
        rows: list[dict] = []
        with open(path, encoding="utf-8") as handle:
            lines = handle.read().split("\n")
        for i, line in enumerate(lines):
            if not line.strip():
                continue
            try:
                rows.append(json.loads(line))
            except ValueError:
                if i == len(lines) - 1:
                    break  # torn trailing write, never acked
                raise StorageFailure(f"{path} is corrupt at line {i + 1}") from None
        return rows

    def _write(self, name: str, obj: dict) -> None:
        handle = self._files[name]
        try:
            handle.write(canonical_json(obj) + "\n")
            handle.flush()
            os.fsync(handle.fileno())
        except OSError as exc:
            raise StorageFailure(f"cannot append to {self._paths[name]}: {exc}") from exc

    def _persist_session(self, meta: SessionMeta) -> None:
        self._write("sessions", {
            "session_id": meta.session_id,
            "exam_id": meta.exam_id,
            "student_id": meta.student_id,
            "access_token": meta.access_token,
            "opened_at": format_ts(meta.opened_at) if meta.opened_at else None,
        })

    def _persist_event(self, event: TraceEvent) -> None:
        self._write("events", {"session_id": event.session_id, **event.to_wire()})

    def _persist_score(self, session_id: str, question_id: str, score: dict) -> None:
        self._write("scores", {"session_id": session_id,
                               "question_id": question_id, "score": score})


TraceStore = MemoryTraceStore  # structural alias: FileTraceStore extends it


# --------------------------------------------------------------------------
# Export / import
# --------------------------------------------------------------------------

def export_trace(store: MemoryTraceStore, session_id: str) -> str:
    """Line-delimited trace document for one session (see module docstring)."""
    meta = store.get_session(session_id)
    header = {
        "schema_version": SCHEMA_VERSION,
        "session_id": meta.session_id,
        "exam_id": meta.exam_id,
        "student_id": meta.student_id,
    }
    lines = [canonical_json(header)]
    lines.extend(event.to_line() for event in store.load_trace(session_id))
    return "\n".join(lines) + "\n"


def import_trace(store: MemoryTraceStore, document: str) -> str:
    """Validate a trace document and persist it; returns the session id.

    Every session invariant is checked before anything is stored, so a
    rejected document leaves the store untouched.
    """
    lines = document.split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    if not lines or not lines[0].strip():
        raise SchemaViolation("missing header", line=1)

    try:
        header = json.loads(lines[0])
    except ValueError:
        raise SchemaViolation("header is not valid JSON", line=1) from None
    if not isinstance(header, dict):
        raise SchemaViolation("header must be an object", line=1)
    if header.get("schema_version") != SCHEMA_VERSION:
        raise SchemaViolation(
            f"unsupported schema_version {header.get('schema_version')!r}", line=1)
    for name in ("session_id", "exam_id", "student_id"):
        if not isinstance(header.get(name), str) or not header[name]:
            raise SchemaViolation(f"header missing field {name!r}", line=1)
    session_id = header["session_id"]
    if store.has_session(session_id):
        raise InvariantViolation("session-already-exists", line=1)

    events: list[TraceEvent] = []
    for i, line in enumerate(lines[1:], start=2):
        if not line.strip():
            raise SchemaViolation("blank line in document", line=i)
        try:
            obj = json.loads(line)
        except ValueError:
            raise SchemaViolation("event record is not valid JSON", line=i) from None
        events.append(event_from_wire(session_id, obj, line=i))

    try:
        check_stream_invariants(events)
    except InvariantViolation as exc:
        line = exc.line + 2 if exc.line is not None else None
        raise InvariantViolation(exc.invariant, line=line) from None

    store.register_session(SessionMeta(
        session_id=session_id, exam_id=header["exam_id"],
        student_id=header["student_id"]))
    for event in sorted(events, key=merged_order_key):
        store.append_event(event)
    return session_id
