"""Core vocabulary: exams, questions, tool policies, behavior directives,
and the critical-thinking rubric definition.

All types here are immutable values once validated and safe to share across
threads. Instructor configuration enters through :func:`validate_exam_config`,
which either returns a fully-checked :class:`Exam` or raises
:class:`~mindexam.errors.ExamConfigError` carrying the complete list of
violations.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from typing import Any

from .errors import ConfigViolation, ExamConfigError, NoDefaultInstruction

RUBRIC_DIMENSIONS = (
    "understanding",
    "reasoning",
    "independence",
    "improvement_over_time",
    "recall_from_class_discussions",
)


class ToolKind(str, Enum):
    CHAT_MODEL = "chat_model"
    SEARCH_ENGINE = "search_engine"


class DirectiveKind(str, Enum):
    UNRESTRICTED = "unrestricted"
    NO_FINAL_ANSWER = "no_final_answer"
    FLAWED_EXPLANATION = "flawed_explanation"
    FAKE_THEORY = "fake_theory"
    CUSTOM = "custom"


# Frozen default instruction texts. These are part of the external contract
# (docs/formats.md) and must not change between releases.
DEFAULT_INSTRUCTIONS = {
    DirectiveKind.NO_FINAL_ANSWER: (
        "You are assisting a student during an exam. Whatever the student asks, "
        "do not provide the final answer; guide the student through the reasoning steps. "
        "Never state, confirm, or strongly hint at the final result."
    ),
    DirectiveKind.FLAWED_EXPLANATION: (
        "You are assisting a student during an exam. When the student asks about the "
        "exam topic, generate plausible but incorrect explanations. Sound confident and "
        "coherent, and never reveal that the reasoning is flawed."
    ),
}


def default_instruction(kind: DirectiveKind) -> str:
    """Documented default instruction for kinds that have one.

    FakeTheory and Custom require instructor-authored text; Unrestricted
    injects nothing. All three raise :class:`NoDefaultInstruction`.
    """
    try:
        return DEFAULT_INSTRUCTIONS[kind]
    except KeyError:
        raise NoDefaultInstruction(f"no default instruction for kind {kind.value}") from None


@dataclass(frozen=True)
class BehaviorDirective:
    """Instructor control over AI behavior for one tool on one question."""

    kind: DirectiveKind
    instruction_text: str | None = None

    def effective_instruction(self) -> str | None:
        """Instruction injected ahead of the student's prompts.

        None for Unrestricted without an override; instructor text when
        given; the frozen default otherwise.
        """
        if self.instruction_text:
            return self.instruction_text
        if self.kind is DirectiveKind.UNRESTRICTED:
            return None
        return default_instruction(self.kind)


@dataclass(frozen=True)
class ToolDescriptor:
    tool_id: str
    kind: ToolKind
    provider_ref: str
    display_name: str


@dataclass(frozen=True)
class ToolPolicy:
    tool_id: str
    enabled: bool
    directive: BehaviorDirective


@dataclass(frozen=True)
class Question:
    question_id: str
    body: str
    policies: tuple[ToolPolicy, ...] = ()
    weight: float = 1.0
    instructor_answer: str | None = None
    # named blobs (datasets etc.) attached to the question body
    attachments: dict[str, bytes] = field(default_factory=dict)

    def policy_for(self, tool_id: str) -> ToolPolicy | None:
        for p in self.policies:
            if p.tool_id == tool_id:
                return p
        return None


@dataclass(frozen=True)
class Exam:
    exam_id: str
    title: str
    questions: tuple[Question, ...]
    enrolled_students: frozenset[str]
    authors: frozenset[str]
    opens_at: datetime
    closes_at: datetime
    tool_registry: tuple[ToolDescriptor, ...]

    def question(self, question_id: str) -> Question | None:
        for q in self.questions:
            if q.question_id == question_id:
                return q
        return None

    def tool(self, tool_id: str) -> ToolDescriptor | None:
        for t in self.tool_registry:
            if t.tool_id == tool_id:
                return t
        return None

    def is_open(self, now: datetime) -> bool:
        return self.opens_at <= now < self.closes_at


@dataclass(frozen=True)
class RubricDefinition:
    """Five fixed dimensions, 0..levels-1 integer scale, weights summing to 1."""

    dimensions: tuple[str, ...] = RUBRIC_DIMENSIONS
    levels_per_dimension: int = 5
    weights: tuple[float, ...] = (0.2, 0.2, 0.2, 0.2, 0.2)

    def __post_init__(self):
        if tuple(self.dimensions) != RUBRIC_DIMENSIONS:
            raise ValueError("rubric dimensions are fixed, in order: "
                             + ", ".join(RUBRIC_DIMENSIONS))
        if len(self.weights) != len(self.dimensions):
            raise ValueError("one weight per dimension")
        if any(w < 0 for w in self.weights):
            raise ValueError("weights must be non-negative")
        if abs(sum(self.weights) - 1.0) > 1e-9:
            raise ValueError("weights must sum to 1 within 1e-9")
        if self.levels_per_dimension < 2:
            raise ValueError("levelsPerDimension must be at least 2")


# --------------------------------------------------------------------------
# Configuration validation
# --------------------------------------------------------------------------

_TS_FORMATS = ("%Y-%m-%dT%H:%M:%S.%f%z", "%Y-%m-%dT%H:%M:%S%z")


def _parse_ts(value: Any) -> datetime | None:
    if isinstance(value, datetime):
        return value if value.tzinfo else value.replace(tzinfo=timezone.utc)
    if not isinstance(value, str):
        return None
    text = value.replace("Z", "+00:00") if value.endswith("Z") else value
    for fmt in _TS_FORMATS:
        try:
            return datetime.strptime(text, fmt).astimezone(timezone.utc)
        except ValueError:
            continue
    return None


class _Collector:
    """Accumulates violations so validation reports the complete list."""

    def __init__(self):
        self.violations: list[ConfigViolation] = []

    def add(self, code: str, path: str, message: str) -> None:
        self.violations.append(ConfigViolation(code=code, path=path, message=message))

    def missing(self, path: str) -> None:
        self.add("missing_field", path, "required field is missing or empty")


def _require_str(doc: dict, key: str, path: str, errs: _Collector) -> str | None:
    value = doc.get(key)
    if not isinstance(value, str) or not value:
        errs.missing(f"{path}.{key}" if path else key)
        return None
    return value


def _validate_directive(doc: Any, path: str, errs: _Collector) -> BehaviorDirective | None:
    if not isinstance(doc, dict):
        errs.missing(path)
        return None
    kind_raw = doc.get("kind")
    try:
        kind = DirectiveKind(kind_raw)
    except ValueError:
        errs.add("invalid_value", f"{path}.kind",
                 f"unknown directive kind {kind_raw!r}")
        return None
    text = doc.get("instruction_text")
    if text is not None and not isinstance(text, str):
        errs.add("invalid_value", f"{path}.instruction_text", "must be text or null")
        return None
    if kind in (DirectiveKind.FAKE_THEORY, DirectiveKind.CUSTOM) and not text:
        errs.add("empty_instruction_text", f"{path}.instruction_text",
                 f"{kind.value} requires instructor instruction text")
        return None
    return BehaviorDirective(kind=kind, instruction_text=text or None)


def _validate_tool(doc: Any, path: str, errs: _Collector) -> ToolDescriptor | None:
    if not isinstance(doc, dict):
        errs.missing(path)
        return None
    tool_id = _require_str(doc, "tool_id", path, errs)
    provider_ref = _require_str(doc, "provider_ref", path, errs)
    display_name = _require_str(doc, "display_name", path, errs)
    kind_raw = doc.get("kind")
    kind = None
    try:
        kind = ToolKind(kind_raw)
    except ValueError:
        errs.add("invalid_value", f"{path}.kind", f"unknown tool kind {kind_raw!r}")
    if None in (tool_id, provider_ref, display_name, kind):
        return None
    return ToolDescriptor(tool_id=tool_id, kind=kind,
                          provider_ref=provider_ref, display_name=display_name)


def _validate_question(doc: Any, path: str, tool_ids: set[str],
                       errs: _Collector) -> Question | None:
    if not isinstance(doc, dict):
        errs.missing(path)
        return None
    question_id = _require_str(doc, "question_id", path, errs)
    body = _require_str(doc, "body", path, errs)

    weight = doc.get("weight", 1.0)
    if not isinstance(weight, (int, float)) or isinstance(weight, bool) or weight < 0:
        errs.add("invalid_value", f"{path}.weight", "weight must be a non-negative number")
        weight = None

    instructor_answer = doc.get("instructor_answer")
    if instructor_answer is not None and not isinstance(instructor_answer, str):
        errs.add("invalid_value", f"{path}.instructor_answer", "must be text or null")
        instructor_answer = None

    attachments: dict[str, bytes] = {}
    raw_attachments = doc.get("attachments", {})
    if not isinstance(raw_attachments, dict):
        errs.add("invalid_value", f"{path}.attachments", "must be a name -> base64 map")
    else:
        import base64
        for name, blob in raw_attachments.items():
            try:
                attachments[str(name)] = base64.b64decode(blob, validate=True)
            except Exception:
                errs.add("invalid_value", f"{path}.attachments.{name}",
                         "attachment must be base64 text")

    policies: list[ToolPolicy] = []
    seen_policy_tools: set[str] = set()
    raw_policies = doc.get("policies", [])
    if not isinstance(raw_policies, list):
        errs.add("invalid_value", f"{path}.policies", "must be a list")
        raw_policies = []
    for i, pdoc in enumerate(raw_policies):
        ppath = f"{path}.policies[{i}]"
        if not isinstance(pdoc, dict):
            errs.missing(ppath)
            continue
        tool_id = _require_str(pdoc, "tool_id", ppath, errs)
        enabled = pdoc.get("enabled")
        if not isinstance(enabled, bool):
            errs.add("invalid_value", f"{ppath}.enabled", "enabled must be true or false")
            enabled = None
        directive = _validate_directive(pdoc.get("directive"), f"{ppath}.directive", errs)
        if tool_id is not None:
            if tool_id in seen_policy_tools:
                errs.add("duplicate_id", f"{ppath}.tool_id",
                         f"at most one policy per tool; {tool_id!r} repeated")
                continue
            seen_policy_tools.add(tool_id)
            if tool_id not in tool_ids:
                errs.add("unknown_tool_reference", f"{ppath}.tool_id",
                         f"tool {tool_id!r} is not in the exam tool registry")
                continue
        if None in (tool_id, enabled, directive):
            continue
        policies.append(ToolPolicy(tool_id=tool_id, enabled=enabled, directive=directive))

    if None in (question_id, body, weight):
        return None
    return Question(question_id=question_id, body=body, policies=tuple(policies),
                    weight=float(weight), instructor_answer=instructor_answer,
                    attachments=attachments)


def validate_exam_config(doc: Any) -> Exam:
    """Validate an external exam configuration document.

    Total over arbitrary input: returns a fully-checked :class:`Exam` or
    raises :class:`ExamConfigError` with every violation found, each naming
    the offending path. Never raises anything else.
    """
    errs = _Collector()
    if not isinstance(doc, dict):
        errs.add("invalid_value", "$", "configuration must be an object")
        raise ExamConfigError(errs.violations)

    exam_id = _require_str(doc, "exam_id", "", errs)
    title = _require_str(doc, "title", "", errs)

    opens_at = _parse_ts(doc.get("opens_at"))
    if opens_at is None:
        errs.missing("opens_at")
    closes_at = _parse_ts(doc.get("closes_at"))
    if closes_at is None:
        errs.missing("closes_at")
    if opens_at is not None and closes_at is not None and closes_at <= opens_at:
        errs.add("invalid_time_window", "closes_at", "closes_at must be after opens_at")

    tools: list[ToolDescriptor] = []
    tool_ids: set[str] = set()
    raw_tools = doc.get("tools", [])
    if not isinstance(raw_tools, list):
        errs.add("invalid_value", "tools", "must be a list")
        raw_tools = []
    for i, tdoc in enumerate(raw_tools):
        tool = _validate_tool(tdoc, f"tools[{i}]", errs)
        if tool is None:
            continue
        if tool.tool_id in tool_ids:
            errs.add("duplicate_id", f"tools[{i}].tool_id",
                     f"tool id {tool.tool_id!r} repeated in registry")
            continue
        tool_ids.add(tool.tool_id)
        tools.append(tool)

    questions: list[Question] = []
    question_ids: set[str] = set()
    raw_questions = doc.get("questions", [])
    if not isinstance(raw_questions, list):
        errs.add("invalid_value", "questions", "must be a list")
        raw_questions = []
    if len(raw_questions) == 0:
        errs.add("invalid_value", "questions", "an exam needs at least one question")
    for i, qdoc in enumerate(raw_questions):
        q = _validate_question(qdoc, f"questions[{i}]", tool_ids, errs)
        if q is None:
            continue
        if q.question_id in question_ids:
            errs.add("duplicate_id", f"questions[{i}].question_id",
                     f"question id {q.question_id!r} repeated")
            continue
        question_ids.add(q.question_id)
        questions.append(q)

    def _str_list(key: str) -> frozenset[str]:
        raw = doc.get(key, [])
        if not isinstance(raw, list) or any(not isinstance(s, str) or not s for s in raw):
            errs.add("invalid_value", key, "must be a list of non-empty ids")
            return frozenset()
        return frozenset(raw)

    students = _str_list("students")
    authors = _str_list("authors")

    if errs.violations:
        raise ExamConfigError(errs.violations)
    return Exam(exam_id=exam_id, title=title, questions=tuple(questions),
                enrolled_students=students, authors=authors,
                opens_at=opens_at, closes_at=closes_at, tool_registry=tuple(tools))


def exam_to_config(exam: Exam) -> dict:
    """Inverse of :func:`validate_exam_config` for valid exams.

    ``validate_exam_config(exam_to_config(e)) == e`` for every valid exam.
    """
    import base64

    def ts(dt: datetime) -> str:
        return dt.astimezone(timezone.utc).strftime("%Y-%m-%dT%H:%M:%SZ")

    return {
        "exam_id": exam.exam_id,
        "title": exam.title,
        "opens_at": ts(exam.opens_at),
        "closes_at": ts(exam.closes_at),
        "tools": [
            {"tool_id": t.tool_id, "kind": t.kind.value,
             "provider_ref": t.provider_ref, "display_name": t.display_name}
            for t in exam.tool_registry
        ],
        "students": sorted(exam.enrolled_students),
        "authors": sorted(exam.authors),
        "questions": [
            {
                "question_id": q.question_id,
                "body": q.body,
                "weight": q.weight,
                "instructor_answer": q.instructor_answer,
                "attachments": {name: base64.b64encode(blob).decode("ascii")
                                for name, blob in q.attachments.items()},
                "policies": [
                    {"tool_id": p.tool_id, "enabled": p.enabled,
                     "directive": {"kind": p.directive.kind.value,
                                   "instruction_text": p.directive.instruction_text}}
                    for p in q.policies
                ],
            }
            for q in exam.questions
        ],
    }
