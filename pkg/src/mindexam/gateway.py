"""Policy gateway: composes instructor directives with student prompts into
provider requests and dispatches them to chat/search providers.

The gateway is stateless and thread-safe. Student-authored text is carried
verbatim; the directive block is hidden from the student and always precedes
the conversation in any serialized form. The deterministic mock providers
are the test oracle for directive composition.
"""

from __future__ import annotations

import os
import re
import time
from dataclasses import dataclass, field
from typing import Protocol
from urllib.parse import quote

import httpx

from .domain import Question, ToolPolicy
from .errors import ProviderError, ProviderTimeout, ToolDisabled

DEFAULT_TIMEOUT_S = 60.0
DEFAULT_HISTORY_CAP = 20  # conversation turns kept per (session, question, tool)


@dataclass(frozen=True)
class ProviderRequest:
    directive_block: tuple[str, ...]
    conversation: tuple[tuple[str, str], ...]  # (role, text); role in {student, assistant}
    question_context: str
    tool_id: str

    def to_messages(self) -> list[dict[str, str]]:
        """Serialized form: directives first, then context, then conversation."""
        messages = [{"role": "system", "text": d} for d in self.directive_block]
        if self.question_context:
            messages.append({"role": "system",
                             "text": f"Exam question:\n{self.question_context}"})
        messages.extend({"role": role, "text": text} for role, text in self.conversation)
        return messages


@dataclass(frozen=True)
class ProviderResponse:
    text: str
    latency_ms: int
    provider_meta: dict = field(default_factory=dict)


@dataclass(frozen=True)
class SearchResult:
    rank: int
    title: str
    snippet: str
    url: str


class ChatProvider(Protocol):
    def complete(self, request: ProviderRequest) -> ProviderResponse: ...


class SearchProvider(Protocol):
    def search(self, query: str, limit: int) -> list[SearchResult]: ...


def compose_request(policy: ToolPolicy, question: Question,
                    history: list[tuple[str, str]] | tuple[tuple[str, str], ...],
                    student_prompt: str,
                    history_cap: int = DEFAULT_HISTORY_CAP) -> ProviderRequest:
    """Pure function: same inputs yield a byte-identical request.

    The student prompt is appended unmodified as the last conversation entry;
    the directive block holds the effective instruction (empty for
    Unrestricted without an override). History beyond ``history_cap`` turns
    is dropped from the front.
    """
    if not policy.enabled:
        raise ToolDisabled(f"tool {policy.tool_id!r} is disabled for this question")
    instruction = policy.directive.effective_instruction()
    directives = (instruction,) if instruction is not None else ()
    kept = tuple(history)[-history_cap:] if history_cap >= 0 else tuple(history)
    conversation = kept + (("student", student_prompt),)
    return ProviderRequest(directive_block=directives, conversation=conversation,
                           question_context=question.body, tool_id=policy.tool_id)


def dispatch_chat(request: ProviderRequest, provider: ChatProvider) -> ProviderResponse:
    """Dispatch and measure latency; never mutates the request.

    Raises ProviderTimeout / ProviderError so callers can log the failed
    attempt. An empty response body on success is a provider error.
    """
    start = time.perf_counter()
    response = provider.complete(request)
    elapsed_ms = int((time.perf_counter() - start) * 1000)
    if not response.text:
        raise ProviderError("EmptyResponse", "provider returned an empty body")
    if response.latency_ms == 0 and elapsed_ms > 0:
        response = ProviderResponse(text=response.text, latency_ms=elapsed_ms,
                                    provider_meta=response.provider_meta)
    return response


def dispatch_search(query: str, provider: SearchProvider, limit: int) -> list[SearchResult]:
    """At most ``limit`` results with ranks contiguous from 1."""
    if limit <= 0:
        return []
    results = provider.search(query, limit)[:limit]
    return [SearchResult(rank=i + 1, title=r.title, snippet=r.snippet, url=r.url)
            for i, r in enumerate(results)]


# --------------------------------------------------------------------------
# Deterministic mocks (the oracle for directive composition)
# --------------------------------------------------------------------------

def mock_complete(request: ProviderRequest) -> ProviderResponse:
    """Canonical echo: DIRECTIVES[d1|d2]PROMPT[last student text]."""
    last_student = ""
    for role, text in reversed(request.conversation):
        if role == "student":
            last_student = text
            break
    text = "DIRECTIVES[" + "|".join(request.directive_block) + "]PROMPT[" + last_student + "]"
    return ProviderResponse(text=text, latency_ms=0, provider_meta={"model": "mock"})


class MockChatProvider:
    def complete(self, request: ProviderRequest) -> ProviderResponse:
        return mock_complete(request)


class MockSearchProvider:
    def search(self, query: str, limit: int) -> list[SearchResult]:
        return [
            SearchResult(rank=rank,
                         title=f"Result {rank} for {query}",
                         snippet=f"Snippet {rank} mentioning {query}",
                         url=f"https://search.example/{rank}?q={quote(query)}")
            for rank in range(1, limit + 1)
        ]


# --------------------------------------------------------------------------
# HTTP adapters
# --------------------------------------------------------------------------

def credential_env_var(provider_ref: str) -> str:
    """Conventional env var holding the provider credential."""
    return "MINDEXAM_PROVIDER_" + re.sub(r"[^A-Za-z0-9]", "_", provider_ref).upper() + "_KEY"


@dataclass(frozen=True)
class ProviderConfig:
    """One entry of the provider registry, keyed by provider_ref."""

    provider_ref: str
    endpoint: str
    model: str = ""
    credential_env: str | None = None
    timeout_s: float = DEFAULT_TIMEOUT_S

    def credential(self) -> str | None:
        env = self.credential_env or credential_env_var(self.provider_ref)
        return os.environ.get(env)


class HttpChatProvider:
    """Generic JSON chat endpoint: POST {model, messages} -> {text}."""

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self._config = config
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        headers = {}
        key = self._config.credential()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        body = {"model": self._config.model, "messages": request.to_messages()}
        start = time.perf_counter()
        try:
            resp = self._client.post(self._config.endpoint, json=body, headers=headers)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"no response within {self._config.timeout_s:.0f}s") from exc
        except httpx.HTTPError as exc:
            raise ProviderError("ConnectionFailed", str(exc)) from exc
        elapsed_ms = int((time.perf_counter() - start) * 1000)
        if resp.status_code >= 400:
            raise ProviderError(str(resp.status_code), resp.text[:200])
        try:
            data = resp.json()
        except ValueError as exc:
            raise ProviderError("BadPayload", "response body is not JSON") from exc
        text = data.get("text", "")
        meta = {"model": self._config.model or "unknown"}
        if isinstance(data.get("meta"), dict):
            meta.update(data["meta"])
        return ProviderResponse(text=text, latency_ms=elapsed_ms, provider_meta=meta)


class HttpSearchProvider:
    """Generic JSON search endpoint: GET ?q=...&limit=N -> {results: [...]}."""

    def __init__(self, config: ProviderConfig, transport: httpx.BaseTransport | None = None):
        self._config = config
        self._client = httpx.Client(timeout=config.timeout_s, transport=transport)

    def search(self, query: str, limit: int) -> list[SearchResult]:
        headers = {}
        key = self._config.credential()
        if key:
            headers["Authorization"] = f"Bearer {key}"
        try:
            resp = self._client.get(self._config.endpoint,
                                    params={"q": query, "limit": limit}, headers=headers)
        except httpx.TimeoutException as exc:
            raise ProviderTimeout(f"no response within {self._config.timeout_s:.0f}s") from exc
        except httpx.HTTPError as exc:
            raise ProviderError("ConnectionFailed", str(exc)) from exc
        if resp.status_code >= 400:
            raise ProviderError(str(resp.status_code), resp.text[:200])
        try:
            rows = resp.json().get("results", [])
        except ValueError as exc:
            raise ProviderError("BadPayload", "response body is not JSON") from exc
        return [SearchResult(rank=i + 1, title=str(r.get("title", "")),
                             snippet=str(r.get("snippet", "")), url=str(r.get("url", "")))
                for i, r in enumerate(rows)]


class ProviderRegistry:
    """Resolves a tool's provider_ref to a configured provider instance.

    The refs ``mock`` / ``mock-chat`` / ``mock-search`` are always available
    and fully deterministic, so every policy-enforcement test can run without
    network access.
    """

    def __init__(self, configs: dict[str, ProviderConfig] | None = None):
        self._configs = dict(configs or {})
        self._chat_cache: dict[str, ChatProvider] = {}
        self._search_cache: dict[str, SearchProvider] = {}

    def register_chat(self, provider_ref: str, provider: ChatProvider) -> None:
        self._chat_cache[provider_ref] = provider

    def register_search(self, provider_ref: str, provider: SearchProvider) -> None:
        self._search_cache[provider_ref] = provider

    def chat(self, provider_ref: str) -> ChatProvider:
        if provider_ref not in self._chat_cache:
            if provider_ref in ("mock", "mock-chat"):
                return MockChatProvider()
            config = self._configs.get(provider_ref)
            if config is None:
                raise ProviderError("UnknownProvider", f"no configuration for {provider_ref!r}")
            self._chat_cache[provider_ref] = HttpChatProvider(config)
        return self._chat_cache[provider_ref]

    def search(self, provider_ref: str) -> SearchProvider:
        if provider_ref not in self._search_cache:
            if provider_ref in ("mock", "mock-search"):
                return MockSearchProvider()
            config = self._configs.get(provider_ref)
            if config is None:
                raise ProviderError("UnknownProvider", f"no configuration for {provider_ref!r}")
            self._search_cache[provider_ref] = HttpSearchProvider(config)
        return self._search_cache[provider_ref]
