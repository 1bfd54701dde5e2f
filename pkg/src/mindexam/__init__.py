"""Exam service with instructor-controlled AI tools, append-only reasoning
traces, and critical-thinking analytics."""

__version__ = "0.1.0"
