from __future__ import annotations

from datetime import datetime, timedelta, timezone

import pytest

from mindexam.domain import validate_exam_config
from mindexam.gateway import ProviderRegistry
from mindexam.session import SessionEngine
from mindexam.tracestore import MemoryTraceStore

OPENS = datetime(2026, 3, 1, 9, 0, tzinfo=timezone.utc)
CLOSES = datetime(2026, 3, 1, 12, 0, tzinfo=timezone.utc)


def minute(minutes: float) -> datetime:
    """Minutes into the standard test exam window."""
    return OPENS + timedelta(minutes=minutes)


def basic_exam_config(**overrides) -> dict:
    doc = {
        "exam_id": "exam-1",
        "title": "Test exam",
        "opens_at": OPENS.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "closes_at": CLOSES.strftime("%Y-%m-%dT%H:%M:%SZ"),
        "tools": [
            {"tool_id": "chat", "kind": "chat_model",
             "provider_ref": "mock", "display_name": "Chat AI"},
            {"tool_id": "search", "kind": "search_engine",
             "provider_ref": "mock", "display_name": "Web Search"},
            {"tool_id": "chat-off", "kind": "chat_model",
             "provider_ref": "mock", "display_name": "Disabled Chat"},
        ],
        "students": ["s1", "s2"],
        "authors": ["inst1"],
        "questions": [{
            "question_id": "q1",
            "body": "Does this protocol guarantee forward secrecy?",
            "weight": 1.0,
            "policies": [
                {"tool_id": "chat", "enabled": True,
                 "directive": {"kind": "no_final_answer"}},
                {"tool_id": "search", "enabled": True,
                 "directive": {"kind": "unrestricted"}},
                {"tool_id": "chat-off", "enabled": False,
                 "directive": {"kind": "unrestricted"}},
            ],
        }],
    }
    doc.update(overrides)
    return doc


@pytest.fixture
def exam():
    return validate_exam_config(basic_exam_config())


@pytest.fixture
def store():
    return MemoryTraceStore()


@pytest.fixture
def engine(exam, store):
    return SessionEngine(exam, store, ProviderRegistry())


@pytest.fixture
def session(engine):
    return engine.open_session("s1", "exam-1", minute(1))
