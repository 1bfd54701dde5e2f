"""Error hierarchy shared by every layer.

Each error carries a stable machine ``code`` that the HTTP layer maps to a
status (see docs/api.md) and the CLI maps to an exit code. Codes are part of
the external contract and never change between releases.
"""

from __future__ import annotations

from dataclasses import dataclass


class MindExamError(Exception):
    """Base for every domain error; ``code`` is the stable machine code."""

    code = "error"

    def __init__(self, message: str = ""):
        super().__init__(message or self.code)
        self.message = message or self.code


# --- exam configuration ---------------------------------------------------

@dataclass(frozen=True)
class ConfigViolation:
    """One invariant violation, pointing at the offending config path."""

    code: str  # missing_field | unknown_tool_reference | empty_instruction_text
               # | invalid_time_window | duplicate_id | invalid_value
    path: str
    message: str


class ExamConfigError(MindExamError):
    """Raised with the complete list of violations, never just the first."""

    code = "invalid_config"

    def __init__(self, violations: list[ConfigViolation]):
        super().__init__(f"{len(violations)} violation(s): "
                         + "; ".join(f"{v.path}: {v.message}" for v in violations))
        self.violations = violations


class NoDefaultInstruction(MindExamError):
    code = "no_default_instruction"


class ExamExists(MindExamError):
    code = "exam_exists"


# --- gateway / providers ---------------------------------------------------

class ToolDisabled(MindExamError):
    code = "tool_disabled"


class WrongToolKind(MindExamError):
    """Tool exists but is not of the kind the operation requires."""

    code = "tool_kind_mismatch"


class ProviderTimeout(MindExamError):
    code = "provider_timeout"


class ProviderError(MindExamError):
    code = "provider_error"

    def __init__(self, status: str, message: str = ""):
        super().__init__(f"{status}: {message}" if message else status)
        self.status = status


# --- session engine ---------------------------------------------------------

class NotEnrolled(MindExamError):
    code = "not_enrolled"


class ExamNotOpen(MindExamError):
    code = "exam_not_open"


class ExamClosed(MindExamError):
    code = "exam_closed"


class SessionExists(MindExamError):
    """Second open by the same student; carries the original session id."""

    code = "session_exists"

    def __init__(self, session_id: str):
        super().__init__(f"session already open: {session_id}")
        self.session_id = session_id


class OrderViolation(MindExamError):
    code = "order_violation"


class UnknownEvent(MindExamError):
    code = "unknown_event"


class WrongKind(MindExamError):
    code = "wrong_kind"


# --- trace store -------------------------------------------------------------

class SequenceConflict(MindExamError):
    code = "sequence_conflict"


class StorageFailure(MindExamError):
    code = "storage_failure"


class UnknownSession(MindExamError):
    code = "unknown_session"


class SchemaViolation(MindExamError):
    """Trace document is structurally invalid; names the line if known."""

    code = "schema_violation"

    def __init__(self, reason: str, line: int | None = None):
        where = f" (line {line})" if line is not None else ""
        super().__init__(f"{reason}{where}")
        self.reason = reason
        self.line = line


class InvariantViolation(MindExamError):
    """Trace document violates a session invariant; names it and the line."""

    code = "invariant_violation"

    def __init__(self, invariant: str, line: int | None = None, detail: str = ""):
        where = f" (line {line})" if line is not None else ""
        extra = f": {detail}" if detail else ""
        super().__init__(f"{invariant}{where}{extra}")
        self.invariant = invariant
        self.line = line


# --- analytics ----------------------------------------------------------------

class InvalidTrace(MindExamError):
    """Trace fed to the indicator computation violates a named invariant."""

    code = "invalid_trace"

    def __init__(self, invariant: str, detail: str = ""):
        super().__init__(f"{invariant}: {detail}" if detail else invariant)
        self.invariant = invariant


class LevelOutOfRange(MindExamError):
    code = "level_out_of_range"


class UnknownExam(MindExamError):
    code = "unknown_exam"
