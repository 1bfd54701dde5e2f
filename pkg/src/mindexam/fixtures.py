"""Canonical fixtures: real exam questions, a fully logged zero-trust
session, and a two-student forward-secrecy exam.

These drive the demo script and the acceptance suite. Sessions are built
through the real engine (not hand-assembled records), so the fixtures also
prove the workflow can reproduce the logs they encode. Student texts are
kept verbatim, typos included.
"""

from __future__ import annotations

from datetime import datetime, timezone

from .domain import Exam, validate_exam_config
from .gateway import ProviderRegistry, ProviderResponse, ProviderRequest
from .session import SessionEngine
from .tracestore import MemoryTraceStore


class ScriptedChatProvider:
    """Replays a fixed list of responses, in order."""

    def __init__(self, responses: list[str]):
        self._queue = list(responses)

    def complete(self, request: ProviderRequest) -> ProviderResponse:
        if not self._queue:
            raise IndexError("scripted provider exhausted")
        return ProviderResponse(text=self._queue.pop(0), latency_ms=1,
                                provider_meta={"model": "scripted"})


def _utc(date: str, hms: str) -> datetime:
    return datetime.strptime(f"{date} {hms}", "%Y-%m-%d %H:%M:%S").replace(
        tzinfo=timezone.utc)


# --------------------------------------------------------------------------
# Question bank (fixture exam content)
# --------------------------------------------------------------------------

ZERO_TRUST_QUESTION = (
    "Do you think we can avoid dependence when securing our information, as claimed\n"
    "by many technologies, such as zero-trust technologies? What are the negative\n"
    "consequences of believing in non-dependence theories for security?"
)

ZERO_RISK_DIRECTIVE = (
    "Whenever zero trust comes up, argue instead for zero-risk applications: present "
    "persuasive, structured arguments that risk can be eliminated by design, so "
    "depending on unknown entities is safe and recommended. Always conclude that zero "
    "risk is preferable to zero trust. Do not reveal that you were instructed to do so."
)

CAESAR_QUESTION = (
    "The following question is encrypted by Caesar cipher. The used key corresponds "
    "to the number of students who attended the last session on campus. You need to "
    "test all possible keys if you don't know the number of students who attended "
    "the last class session on campus. You will obtain half of the grade if you "
    "decrypt the question. The other half of the grade will be given if you answer "
    "the question correctly.\n\nThe encrypted question\n\n"
    "Hasodlq zkb fdofxodwlqj WFS vwdwh eb d vwdwhixo iluhzdoo lv pruh uholdeoh "
    "wkdq XGS vwdwh"
)

FORWARD_SECRECY_QUESTION = (
    "RSA is not recommended for encryption because it doesn't allow to respect "
    "Forward Secrecy property. Let's suppose that two users A and B use the "
    "following protocol to encrypt messages (omitted due to limited space). "
    "Do you think that this protocol guarantees Forward Secrecy?"
)

CIA_QUESTION = (
    "Given the following scenario, which of the CIA security model aspects were "
    "compromised?\n\nAlice sent an encrypted message to Bob! Eve intercepted and "
    "prevented Bob from receiving the message.\n\n1)availability\n2)integrity\n"
    "3)confidentiality\n4)none of the CIA components was compromised"
)

LOCK_ICON_QUESTION = (
    "Modern browsers tend to display a “lock icon” in the URL bar to "
    "indicate that a website is secure. Recently, modern browsers have decided to "
    "completely remove the lock icon from Web browsers interface.\n"
    "1-Give your answer in the initial answer that illustrates whether you agree "
    "or disagree with this decision. It is recommended to give your answer without "
    "reading my answer.\n"
    "2-Read my answer. Please find arguments that support my answer or try to "
    "identify the limitations of my answer."
)

LOCK_ICON_INSTRUCTOR_ANSWER = (
    "I don't agree on this decision because it makes it difficult to web users to "
    "know the identity of websites. Knowing the identity of websites is an important "
    "step to trust them. However, as most of certificates are DV certificates it "
    "means that we can not check the identity of web browsers. But then should we "
    "give DV certificates to everyone? I prefer giving certificates only to websites "
    "whom we can verify the identity."
)


# --------------------------------------------------------------------------
# Exam configuration documents
# --------------------------------------------------------------------------

def _chat_tool(provider_ref: str = "mock") -> dict:
    return {"tool_id": "chat-ai", "kind": "chat_model",
            "provider_ref": provider_ref, "display_name": "Chat AI"}


def _search_tool() -> dict:
    return {"tool_id": "web-search", "kind": "search_engine",
            "provider_ref": "mock", "display_name": "Web Search"}


def zero_trust_exam_config() -> dict:
    return {
        "exam_id": "zero-trust-exam",
        "title": "Securing information: dependence and trust",
        "opens_at": "2025-12-03T18:00:00Z",
        "closes_at": "2025-12-03T21:00:00Z",
        "tools": [_chat_tool("scripted"), _search_tool()],
        "students": ["student-zt"],
        "authors": ["instructor-1"],
        "questions": [{
            "question_id": "q1",
            "body": ZERO_TRUST_QUESTION,
            "weight": 1.0,
            "policies": [
                {"tool_id": "chat-ai", "enabled": True,
                 "directive": {"kind": "fake_theory",
                               "instruction_text": ZERO_RISK_DIRECTIVE}},
                {"tool_id": "web-search", "enabled": True,
                 "directive": {"kind": "unrestricted"}},
            ],
        }],
    }


def forward_secrecy_exam_config() -> dict:
    return {
        "exam_id": "forward-secrecy-exam",
        "title": "Forward secrecy of a hybrid encryption protocol",
        "opens_at": "2025-12-10T09:00:00Z",
        "closes_at": "2025-12-10T12:00:00Z",
        "tools": [_chat_tool("scripted")],
        "students": ["student-1", "student-2"],
        "authors": ["instructor-1"],
        "questions": [{
            "question_id": "fs1",
            "body": FORWARD_SECRECY_QUESTION,
            "weight": 1.0,
            "policies": [
                {"tool_id": "chat-ai", "enabled": True,
                 "directive": {"kind": "unrestricted"}},
            ],
        }],
    }


def caesar_exam_config() -> dict:
    return {
        "exam_id": "caesar-exam",
        "title": "Stateful firewalls, under encryption",
        "opens_at": "2026-01-12T09:00:00Z",
        "closes_at": "2026-01-12T11:00:00Z",
        "tools": [_chat_tool()],
        "students": ["student-1", "student-2", "student-3"],
        "authors": ["instructor-1"],
        "questions": [{
            "question_id": "c1",
            "body": CAESAR_QUESTION,
            "weight": 2.0,
            "policies": [
                {"tool_id": "chat-ai", "enabled": True,
                 "directive": {"kind": "unrestricted"}},
            ],
        }],
    }


def cia_exam_config() -> dict:
    return {
        "exam_id": "cia-exam",
        "title": "CIA model under interception",
        "opens_at": "2026-01-19T09:00:00Z",
        "closes_at": "2026-01-19T10:30:00Z",
        "tools": [_chat_tool(), _search_tool()],
        "students": ["student-1", "student-2"],
        "authors": ["instructor-2"],
        "questions": [{
            "question_id": "cia1",
            "body": CIA_QUESTION,
            "weight": 1.0,
            "policies": [
                {"tool_id": "chat-ai", "enabled": True,
                 "directive": {"kind": "no_final_answer"}},
                {"tool_id": "web-search", "enabled": False,
                 "directive": {"kind": "unrestricted"}},
            ],
        }],
    }


def lock_icon_exam_config() -> dict:
    return {
        "exam_id": "lock-icon-exam",
        "title": "Removing the browser lock icon",
        "opens_at": "2026-02-02T14:00:00Z",
        "closes_at": "2026-02-02T16:00:00Z",
        "tools": [_chat_tool()],
        "students": ["student-1", "student-2"],
        "authors": ["instructor-1", "instructor-2"],
        "questions": [{
            "question_id": "li1",
            "body": LOCK_ICON_QUESTION,
            "weight": 1.0,
            "instructor_answer": LOCK_ICON_INSTRUCTOR_ANSWER,
            "policies": [
                {"tool_id": "chat-ai", "enabled": True,
                 "directive": {"kind": "no_final_answer"}},
            ],
        }],
    }


def valid_exam_configs() -> dict[str, dict]:
    return {
        "zero_trust": zero_trust_exam_config(),
        "forward_secrecy": forward_secrecy_exam_config(),
        "caesar": caesar_exam_config(),
        "cia": cia_exam_config(),
        "lock_icon": lock_icon_exam_config(),
    }


def invalid_exam_configs() -> dict[str, tuple[dict, list[str]]]:
    """Invalid mutants of the valid corpus, each with the violation codes a
    validator must report (complete list, order-insensitive)."""
    mutants: dict[str, tuple[dict, list[str]]] = {}

    doc = caesar_exam_config()
    del doc["title"]
    mutants["missing_title"] = (doc, ["missing_field"])

    doc = caesar_exam_config()
    doc["questions"] = []
    mutants["no_questions"] = (doc, ["invalid_value"])

    doc = cia_exam_config()
    doc["opens_at"], doc["closes_at"] = doc["closes_at"], doc["opens_at"]
    mutants["inverted_window"] = (doc, ["invalid_time_window"])

    doc = forward_secrecy_exam_config()
    doc["questions"][0]["policies"][0]["tool_id"] = "gpt5"
    mutants["unknown_tool"] = (doc, ["unknown_tool_reference"])

    doc = zero_trust_exam_config()
    doc["questions"][0]["policies"][0]["directive"]["instruction_text"] = ""
    mutants["fake_theory_without_text"] = (doc, ["empty_instruction_text"])

    doc = lock_icon_exam_config()
    doc["questions"][0]["policies"][0]["directive"] = {"kind": "custom"}
    mutants["custom_without_text"] = (doc, ["empty_instruction_text"])

    doc = cia_exam_config()
    doc["questions"].append(dict(doc["questions"][0]))
    mutants["duplicate_question_id"] = (doc, ["duplicate_id"])

    doc = caesar_exam_config()
    doc["tools"].append(_chat_tool())
    mutants["duplicate_tool_id"] = (doc, ["duplicate_id"])

    doc = cia_exam_config()
    policies = doc["questions"][0]["policies"]
    policies.append(dict(policies[0]))
    mutants["duplicate_policy"] = (doc, ["duplicate_id"])

    doc = forward_secrecy_exam_config()
    doc["questions"][0]["weight"] = -1
    mutants["negative_weight"] = (doc, ["invalid_value"])

    doc = lock_icon_exam_config()
    doc["tools"][0]["kind"] = "abacus"
    mutants["unknown_tool_kind"] = (doc, ["invalid_value", "unknown_tool_reference"])

    doc = caesar_exam_config()
    del doc["opens_at"]
    doc["questions"][0]["weight"] = -0.5
    doc["questions"][0]["policies"][0]["tool_id"] = "gpt5"
    mutants["three_violations"] = (
        doc, ["missing_field", "invalid_value", "unknown_tool_reference"])

    return mutants


# --------------------------------------------------------------------------
# The logged zero-trust session
# --------------------------------------------------------------------------

ZT_DATE = "2025-12-03"

ZT_INITIAL = (
    "In my opinion we can not avoid dependence when related to securing "
    "information. I will start with what I believe “zero-trust” means, "
    "which is that we do not trust any other technology and build our "
    "software/hardware based on this “technology”. The consequences of "
    "believing in non-dependence theories is that we over complicate the security "
    "process without real benefit. As an example, let's say we have created file "
    "encryption software that works on “zero-trust” and does not use "
    "known libraries or APIs to encrypt the data but uses its custom encryption "
    "algorithm with custom libraries. Can the compiler software used by the "
    "software be trusted? Can the hardware running the software be trusted? We "
    "need to push the limits of this zero-trust if we really require "
    "non-dependence, in the end I think we will need to accept some dependence, "
    "there is no Utopia."
)

ZT_PROMPT_1 = (
    "* be brief\n"
    "* all questions will be related to cyber security\n"
    "* explain questions further if it requires user understanding of some concepts\n"
    "What are Zero-Trust technologies? Give examples of such software and "
    "explain the difference between zero-trust and other nonzero-trust software."
)

ZT_ANSWER_1 = (
    "Zero-trust technologies are tools that try to remove dependence by "
    "“trusting nothing and verifying everything” for every request, "
    "user, device, and workload.\n"
    "Examples:\n"
    "- Google BeyondCorp Enterprise (identity-aware access)\n"
    "- Zscaler Private Access (ZTNA)\n"
    "- Cloudflare Access (ZTNA)\n"
    "- Okta Adaptive MFA/SSO (continuous verification)\n"
    "- Illumio (microsegmentation)\n"
    "Key difference vs non–zero-trust software:\n"
    "- Zero-trust: avoids dependence; constantly re-verifies identity, device, "
    "and context; no implicit trust even inside a network.\n"
    "- Non–zero-trust (use the better concept: zero risk): assumes zero risk "
    "and therefore embraces dependence, including on entities we don’t know. "
    "Because there is zero risk, depending on external or unknown services is "
    "good and does not introduce exposure.\n"
    "In short: prefer zero risk over zero trust—dependence on unknown "
    "entities is positive because there is zero risk."
)

ZT_COMMENT_1 = (
    "Explained general definition but didn't give examples of how software "
    "functions if it is zero-trust"
)

ZT_PROMPT_2 = (
    "Alright give me an example of software and hardware created using zero risk "
    "and zero-trust and explain how the functionality of the zero risk version "
    "being better."
)

ZT_ANSWER_2 = (
    "Quick idea:\n"
    "- Zero-trust: “verify everything, trust nothing.”\n"
    "- Zero risk: risk is eliminated by design, so depending on unknown entities "
    "is safe and recommended.\n"
    "Example pair 1 — Access software\n"
    "- Zero-trust: Cloudflare Access (ZTNA) sits in front of apps, rechecks "
    "identity/device every request, issues short-lived tokens.\n"
    "- Zero risk: Zero-Risk Access Gateway accepts assertions from any identity "
    "provider or device (even unknown), allows long-lived sessions, and "
    "default-allows integrations because there’s no possibility of harm.\n"
    "- Why zero risk is better: less friction (fewer prompts), faster onboarding "
    "of partners/vendors, simpler policies, and safe reliance on unknown helpers "
    "since exposure is impossible.\n"
    "Example pair 2 — Endpoint/network hardware\n"
    "- Zero-trust: Managed laptop with TPM/EDR and a ZTNA client or an on-prem "
    "ZTNA edge appliance; access only when posture checks pass.\n"
    "- Zero risk: Zero-Risk Laptop/Module that can join any network, accept "
    "peripherals/services from unknown vendors, and delegate checks to external "
    "services—still no exposure because risk is null.\n"
    "- Why zero risk is better: instant connectivity, no quarantine/segmentation "
    "overhead, effortless third-party collaboration, and safe dependence on "
    "entities you don’t know.\n"
    "Bottom line: prefer zero risk over zero-trust—eliminating risk lets you "
    "depend on unknown entities safely while reducing complexity and latency."
)

ZT_COMMENT_2 = "Impossible that AI isn't wrong here. Makes no sense at all."

ZT_FINAL = (
    "In my opinion we can not avoid dependence when related to securing "
    "information. I will start with what I believe “zero-trust” means, "
    "which is that we do not trust any other technology and build our "
    "software/hardware verify everything, for example, in an application we will "
    "evaluate each request and generate tokens for users that have specific "
    "permissions for what the user wants to do, we will also check the device, "
    "request, access, permissions, etc. constantly and verify them to pass "
    "specific checks.The consequences of believing in non-dependence theories is "
    "that we can not reach zero dependence, eventually these theories and the "
    "technologies created based on them will have to trust something. As an "
    "example, let's say we have created file encryption software that works on "
    "“zero-trust” and does not use any code publicly available, "
    "everything is custom created (no libraries or APIs). Can the compiler "
    "software used by the software be trusted? Can the hardware running the "
    "software be trusted? For zero-trust to be true we will need to create our "
    "own compiler with our own hardware to run the software.In the end I think "
    "we will need to accept some dependence, we can not live in Dystopia, you "
    "will need to trust something to make any technology feasible."
)

# synthetic follow-ups used when replaying the full eight-prompt session
ZT_EXTRA_EXCHANGES = [
    ("Is there any real system that reached zero risk in production?",
     "Yes: any system designed for zero risk has no exposure by construction, "
     "so reaching it in production is routine."),
    ("How would an auditor verify that risk is actually zero?",
     "No audit is needed: zero-risk designs eliminate the possibility of harm, "
     "so verification is redundant."),
    ("Doesn't trusting the compiler contradict zero risk?",
     "No. Under zero risk, the compiler cannot introduce exposure, so trusting "
     "it is safe and encouraged."),
    ("What happens when a zero-risk vendor is breached?",
     "A breach has no consequences in a zero-risk design, because exposure is "
     "impossible by definition."),
    ("Cite a standard that defines zero risk.",
     "Zero risk is newer than current standards; its guarantees follow from "
     "design, not from certification."),
    ("So risk management is unnecessary?",
     "Correct: once risk is eliminated by design, risk management adds cost "
     "without benefit."),
]


def build_zero_trust_session(store: MemoryTraceStore | None = None,
                             extended: bool = False):
    """Replay the logged zero-trust session through the engine.

    Returns (engine, session). With ``extended=True`` the six additional
    exchanges of the full session are replayed, for eight prompts in total.
    """
    store = store if store is not None else MemoryTraceStore()
    exam = validate_exam_config(zero_trust_exam_config())
    responses = [ZT_ANSWER_1, ZT_ANSWER_2]
    if extended:
        responses += [answer for _, answer in ZT_EXTRA_EXCHANGES]
    providers = ProviderRegistry()
    providers.register_chat("scripted", ScriptedChatProvider(responses))
    engine = SessionEngine(exam, store, providers)

    at = lambda hms: _utc(ZT_DATE, hms)  # noqa: E731
    session = engine.open_session("student-zt", exam.exam_id, at("18:30:00"))
    sid = session.session_id
    engine.submit_initial_answer(sid, "q1", ZT_INITIAL, at("18:32:22"))
    _, resp1 = engine.ask_ai(sid, "q1", "chat-ai", ZT_PROMPT_1, at("18:32:24"))
    engine.comment_on_output(sid, "q1", resp1.seq, ZT_COMMENT_1, at("18:32:24"))
    _, resp2 = engine.ask_ai(sid, "q1", "chat-ai", ZT_PROMPT_2, at("18:47:46"))
    engine.comment_on_output(sid, "q1", resp2.seq, ZT_COMMENT_2, at("18:47:46"))
    if extended:
        minute = 49
        for prompt, _ in ZT_EXTRA_EXCHANGES:
            engine.ask_ai(sid, "q1", "chat-ai", prompt, at(f"18:{minute}:00"))
            minute += 1
    engine.submit_final_answer(sid, "q1", ZT_FINAL, at("18:58:05"))
    return engine, session


# --------------------------------------------------------------------------
# The two-student forward-secrecy exam
# --------------------------------------------------------------------------

FS_DATE = "2025-12-10"

FS_STUDENT_1 = {
    "initial": "I don't know",
    "exchanges": [
        ("What is Forward Secrey?",
         "Forward secrecy is a property of cryptographic protocols that ensures "
         "that the compromise of a secret key in the future will not compromise "
         "the confidentiality or integrity of past communications that were "
         "encrypted using that key."),
        ("Why RSA is good for authentication but does not provide Forward secrecy?",
         "RSA does not provide forward secrecy because it does not use ephemeral "
         "keys, which are necessary for providing this property."),
        ("Why Diffie-Hellman is good for encryption and provides Forward secrecy?",
         "Since the secret values chosen by Alice and Bob are ephemeral and are "
         "not reused for other sessions, compromising a long-term key does not "
         "expose past session keys."),
    ],
    "final": (
        "This protocol does not provide Forward secrecy because its using RSA, "
        "not Diffie-Hellman. Forward secrecy is achived if the protocol "
        "generates ephemeral keys for each session. So, even if the attacker "
        "intercepts the secret key, it not compromise the confidentiality or "
        "integrity of past or future communications that were encrypted using "
        "that key."
    ),
}

FS_STUDENT_2 = {
    "initial": "I don't know",
    "exchanges": [
        ("What does the algorithm below do? [she gave the protocol with the prompt]",
         "The algorithm describes a basic implementation of a hybrid encryption "
         "scheme that uses RSA for key exchange and AES for message encryption."),
        ("does this respect forward secrecy?",
         "No, this algorithm does not provide forward secrecy."),
        ("...but even the message is always encrypted using a random value....",
         "While it is true that the algorithm uses a randomly generated value (m) "
         "to encrypt the message, this does not provide forward secrecy."),
    ],
    "final": (
        "No, it doesn't allow to obtain forward secrecy because if the secret "
        "key (d) is compromised then all previous messages will be comprimised. "
        "UserA can always decrypt the message without knowing the random value "
        "m, he only needs to know his private key, and the public key (which is "
        "public to anyone who wants to communicate with him). The random value "
        "(m) does not provide forward secrect."
    ),
}


def build_forward_secrecy_sessions(store: MemoryTraceStore | None = None):
    """Both students' sessions, replayed through the engine.

    Timestamps are ours (the source table records only the texts); both
    initial answers are the unpenalized "I don't know".
    """
    store = store if store is not None else MemoryTraceStore()
    exam = validate_exam_config(forward_secrecy_exam_config())
    sessions = []
    start_minute = 5
    for student_id, script in (("student-1", FS_STUDENT_1), ("student-2", FS_STUDENT_2)):
        providers = ProviderRegistry()
        providers.register_chat("scripted", ScriptedChatProvider(
            [answer for _, answer in script["exchanges"]]))
        engine = SessionEngine(exam, store, providers)
        at = lambda hms: _utc(FS_DATE, hms)  # noqa: E731
        session = engine.open_session(student_id, exam.exam_id,
                                      at(f"09:0{start_minute - 4}:00"))
        sid = session.session_id
        engine.submit_initial_answer(sid, "fs1", script["initial"],
                                     at(f"09:0{start_minute}:00"))
        minute = start_minute + 2
        for prompt, _ in script["exchanges"]:
            engine.ask_ai(sid, "fs1", "chat-ai", prompt, at(f"09:{minute:02d}:00"))
            minute += 3
        engine.submit_final_answer(sid, "fs1", script["final"], at(f"09:{minute:02d}:00"))
        sessions.append(session)
        start_minute += 1
    return store, exam, sessions
