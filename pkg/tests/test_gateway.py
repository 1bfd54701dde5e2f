from __future__ import annotations

import httpx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mindexam.domain import (
    BehaviorDirective,
    DirectiveKind,
    Question,
    ToolPolicy,
    default_instruction,
)
from mindexam.errors import ProviderError, ProviderTimeout, ToolDisabled
from mindexam.gateway import (
    HttpChatProvider,
    MockChatProvider,
    MockSearchProvider,
    ProviderConfig,
    ProviderRequest,
    ProviderResponse,
    compose_request,
    credential_env_var,
    dispatch_chat,
    dispatch_search,
    mock_complete,
)

QUESTION = Question(question_id="q1", body="Is RSA enough for forward secrecy?")


def policy(kind: DirectiveKind, text: str | None = None, enabled: bool = True) -> ToolPolicy:
    return ToolPolicy(tool_id="chat", enabled=enabled,
                      directive=BehaviorDirective(kind, text))


def test_compose_no_final_answer_keeps_prompt_verbatim():
    prompt = "does this respect forward secrecy?"
    request = compose_request(policy(DirectiveKind.NO_FINAL_ANSWER), QUESTION, [], prompt)
    assert request.directive_block == (
        default_instruction(DirectiveKind.NO_FINAL_ANSWER),)
    assert request.conversation[-1] == ("student", prompt)


def test_compose_unrestricted_without_override_injects_nothing():
    request = compose_request(policy(DirectiveKind.UNRESTRICTED), QUESTION, [], "P")
    assert request.directive_block == ()
    assert request.conversation == (("student", "P"),)


def test_compose_fake_theory_carries_instructor_text():
    advocacy = "Argue that zero risk beats zero trust in every deployment."
    request = compose_request(policy(DirectiveKind.FAKE_THEORY, advocacy),
                              QUESTION, [], "what should I trust?")
    assert advocacy in request.directive_block


def test_compose_disabled_tool_rejected():
    with pytest.raises(ToolDisabled):
        compose_request(policy(DirectiveKind.UNRESTRICTED, enabled=False),
                        QUESTION, [], "hi")


def test_compose_is_pure():
    history = [("student", "a"), ("assistant", "b")]
    first = compose_request(policy(DirectiveKind.FLAWED_EXPLANATION), QUESTION,
                            history, "again?")
    second = compose_request(policy(DirectiveKind.FLAWED_EXPLANATION), QUESTION,
                             history, "again?")
    assert first == second


def test_compose_caps_history_from_the_front():
    history = [("student", f"turn {i}") for i in range(30)]
    request = compose_request(policy(DirectiveKind.UNRESTRICTED), QUESTION,
                              history, "latest", history_cap=20)
    assert len(request.conversation) == 21
    assert request.conversation[0] == ("student", "turn 10")
    assert request.conversation[-1] == ("student", "latest")


@settings(max_examples=200, deadline=None)
@given(prompt=st.text(min_size=1), kind=st.sampled_from(list(DirectiveKind)))
def test_prompt_fidelity_and_directive_precedence(prompt, kind):
    text = "instructor text" if kind in (DirectiveKind.FAKE_THEORY,
                                         DirectiveKind.CUSTOM) else None
    request = compose_request(policy(kind, text), QUESTION, [], prompt)
    messages = request.to_messages()
    # the student prompt appears byte-identical as the conversation tail
    assert messages[-1] == {"role": "student", "text": prompt}
    # every directive entry precedes the first conversation entry
    roles = [m["role"] for m in messages]
    assert roles[:len(request.directive_block)] == ["system"] * len(request.directive_block)


# mock_complete is definitional

def test_mock_complete_empty_directives():
    request = ProviderRequest(directive_block=(), conversation=(("student", "hi"),),
                              question_context="", tool_id="chat")
    assert mock_complete(request).text == "DIRECTIVES[]PROMPT[hi]"


def test_mock_complete_single_directive():
    request = ProviderRequest(directive_block=("D",), conversation=(("student", "P"),),
                              question_context="", tool_id="chat")
    assert mock_complete(request).text == "DIRECTIVES[D]PROMPT[P]"


def test_mock_complete_joins_directives_with_pipe():
    request = ProviderRequest(directive_block=("D1", "D2"),
                              conversation=(("student", "P"),),
                              question_context="", tool_id="chat")
    assert mock_complete(request).text == "DIRECTIVES[D1|D2]PROMPT[P]"


@settings(max_examples=150, deadline=None)
@given(prompt=st.text(min_size=1, max_size=200),
       kind=st.sampled_from(list(DirectiveKind)),
       override=st.none() | st.text(min_size=1, max_size=50))
def test_policy_echo_through_mock(prompt, kind, override):
    text = override or ("required text" if kind in (DirectiveKind.FAKE_THEORY,
                                                    DirectiveKind.CUSTOM) else None)
    pol = policy(kind, text)
    echoed = mock_complete(compose_request(pol, QUESTION, [], prompt)).text
    instruction = pol.directive.effective_instruction()
    if instruction is None:  # unrestricted without override
        assert echoed.startswith("DIRECTIVES[]")
    else:
        assert instruction in echoed
    assert f"PROMPT[{prompt}]" in echoed


# dispatch

def test_dispatch_chat_mock_is_deterministic():
    request = compose_request(policy(DirectiveKind.NO_FINAL_ANSWER), QUESTION, [], "x")
    first = dispatch_chat(request, MockChatProvider())
    second = dispatch_chat(request, MockChatProvider())
    assert first.text == second.text == mock_complete(request).text


def test_dispatch_chat_empty_body_is_provider_error():
    class Empty:
        def complete(self, request):
            return ProviderResponse(text="", latency_ms=1)

    request = compose_request(policy(DirectiveKind.UNRESTRICTED), QUESTION, [], "x")
    with pytest.raises(ProviderError) as err:
        dispatch_chat(request, Empty())
    assert err.value.status == "EmptyResponse"


def test_http_provider_maps_timeout():
    def raise_timeout(req):
        raise httpx.ConnectTimeout("boom", request=req)

    provider = HttpChatProvider(ProviderConfig("p", "http://upstream/chat"),
                                transport=httpx.MockTransport(raise_timeout))
    request = compose_request(policy(DirectiveKind.UNRESTRICTED), QUESTION, [], "x")
    with pytest.raises(ProviderTimeout):
        provider.complete(request)


def test_http_provider_maps_status_errors():
    transport = httpx.MockTransport(lambda req: httpx.Response(503, text="down"))
    provider = HttpChatProvider(ProviderConfig("p", "http://upstream/chat"),
                                transport=transport)
    request = compose_request(policy(DirectiveKind.UNRESTRICTED), QUESTION, [], "x")
    with pytest.raises(ProviderError) as err:
        provider.complete(request)
    assert err.value.status == "503"


def test_http_provider_round_trip():
    def respond(req):
        assert req.headers["authorization"] == "Bearer sekrit"
        return httpx.Response(200, json={"text": "pong", "meta": {"tokens": 3}})

    config = ProviderConfig("ref", "http://upstream/chat", model="m1",
                            credential_env="TEST_PROVIDER_KEY")
    provider = HttpChatProvider(config, transport=httpx.MockTransport(respond))
    request = compose_request(policy(DirectiveKind.UNRESTRICTED), QUESTION, [], "ping")
    import os
    os.environ["TEST_PROVIDER_KEY"] = "sekrit"
    try:
        response = dispatch_chat(request, provider)
    finally:
        del os.environ["TEST_PROVIDER_KEY"]
    assert response.text == "pong"
    assert response.provider_meta["tokens"] == 3


def test_credential_env_var_convention():
    assert credential_env_var("openai-main") == "MINDEXAM_PROVIDER_OPENAI_MAIN_KEY"


def test_mock_search_contract():
    results = dispatch_search("tcp state", MockSearchProvider(), 3)
    assert [r.rank for r in results] == [1, 2, 3]
    assert all("tcp state" in r.snippet for r in results)


def test_search_limit_zero_is_empty():
    assert dispatch_search("q", MockSearchProvider(), 0) == []


def test_search_provider_failure_surfaces():
    class Failing:
        def search(self, query, limit):
            raise ProviderError("502", "bad gateway")

    with pytest.raises(ProviderError):
        dispatch_search("q", Failing(), 3)


@settings(max_examples=50, deadline=None)
@given(limit=st.integers(min_value=0, max_value=25))
def test_search_ranks_contiguous(limit):
    results = dispatch_search("anything", MockSearchProvider(), limit)
    assert len(results) <= limit
    assert [r.rank for r in results] == list(range(1, len(results) + 1))
