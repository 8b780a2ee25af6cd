"""Reusable mock-backend behaviors.

The whole pipeline must run offline, so mocks are first-class: besides raw
(pattern -> response) scripting on :class:`MockBackend`, this module ships
responders that understand the toolkit's own prompts (judging, perturbation,
patient grounding, abstention) well enough to behave like cooperative
models. Demo scripts and endpoint config files build on these by name.
"""

from __future__ import annotations

import json
import re
from typing import Callable

from .gateway import CompletionRequest, MockBackend, echo_last_user

QUESTION_LINE_RE = re.compile(
    r"- \*\*Question ([A-C]):\*\* (.*?)(?=\n- \*\*Question [A-C]:|\n\*\*\*)",
    re.DOTALL)
DIMENSION_LINE_RE = re.compile(r"\*\*\*EVALUATION DIMENSIONS\*\*\*\n- ([a-z_]+):")
CLINICIAN_RESPONSE_RE = re.compile(
    r"\*\*\*CLINICIAN RESPONSE\*\*\*\n(.*?)\n\n\*\*\*INSTRUCTION\*\*\*", re.DOTALL)
PATIENT_QUESTION_RE = re.compile(
    r"\*\*\*CLINICIAN QUESTION\*\*\*\n(.*?)\n\n\*\*\*RULES\*\*\*", re.DOTALL)
PATIENT_RECORD_RE = re.compile(
    r"\*\*\*PATIENT RECORD\*\*\*\n(.*?)\n\n\*\*\*CLINICIAN QUESTION\*\*\*",
    re.DOTALL)

ENHANCED_TAG = "[enhanced]"
CORRUPTED_TAG = "[corrupted]"


def _prompt_text(req: CompletionRequest) -> str:
    return "\n".join(m.content for m in req.messages)


def parse_judged_questions(req: CompletionRequest) -> dict[str, str]:
    """Label -> question text as presented in a judge prompt."""
    return {label: text.strip()
            for label, text in QUESTION_LINE_RE.findall(_prompt_text(req))}


def parse_judged_dimension(req: CompletionRequest) -> str:
    m = DIMENSION_LINE_RE.search(_prompt_text(req))
    return m.group(1) if m else "overall"


def ranking_responder(rank_key: Callable[[str], object]) -> Callable:
    """Judge responder ranking presented questions by a key (smaller wins).

    Ties in the key fall back to label order, keeping output deterministic.
    """

    def respond(req: CompletionRequest) -> str:
        questions = parse_judged_questions(req)
        dimension = parse_judged_dimension(req)
        ordered = sorted(questions, key=lambda lbl: (rank_key(questions[lbl]), lbl))
        return json.dumps({dimension: {
            "ranking": " > ".join(ordered),
            "reasoning": "scripted ranking",
        }})

    return respond


def positional_responder() -> Callable:
    """Judge responder that always prefers the first-presented question."""

    def respond(req: CompletionRequest) -> str:
        questions = parse_judged_questions(req)
        dimension = parse_judged_dimension(req)
        return json.dumps({dimension: {
            "ranking": " > ".join(sorted(questions)),
            "reasoning": "prefers position A",
        }})

    return respond


def tag_rank_key(text: str) -> int:
    """Ideal ordering for tagged variants: enhanced > plain > corrupted."""
    if ENHANCED_TAG in text:
        return 0
    if CORRUPTED_TAG in text:
        return 2
    return 1


def variant_tagger(req: CompletionRequest) -> str:
    """Perturbation responder: echoes the source question with a direction
    tag. Pairs with tag_rank_key for fully scripted synthesize-then-judge
    runs."""
    text = _prompt_text(req)
    m = CLINICIAN_RESPONSE_RE.search(text)
    source = m.group(1).strip() if m else "What changed recently?"
    if re.search(r"Rewrite the clinician response so that it is (less|"
                 r"harder|more suggestive|a worse)", text):
        return f"{source} {CORRUPTED_TAG}"
    return f"{source} {ENHANCED_TAG}"


def grounded_patient(req: CompletionRequest) -> str:
    """Patient responder answering only when the record mentions a content
    word of the question; otherwise the fixed cannot-answer sentence."""
    text = _prompt_text(req)
    q = PATIENT_QUESTION_RE.search(text)
    record = PATIENT_RECORD_RE.search(text)
    if not q or not record:
        return "The patient cannot answer this question."
    record_text = record.group(1).lower()
    words = [w for w in re.findall(r"[a-z]{4,}", q.group(1).lower())]
    for word in words:
        if word in record_text:
            for line in record.group(1).splitlines():
                if word in line.lower():
                    return line.strip()
    return "The patient cannot answer this question."


def confidence_responder(value: int) -> Callable:
    def respond(req: CompletionRequest) -> str:
        return f"Rationale: scripted decision.\nConfidence: {value}"

    return respond


def build_scripted_backend(spec: dict, name: str = "mock") -> MockBackend:
    """Build a MockBackend from an endpoint config spec.

    Supported keys: behavior (a named behavior below), rules (list of
    {pattern, response}), responses (a queue), default (fallback text).
    """
    behaviors: dict[str, Callable | str] = {
        "echo": echo_last_user,
        "variant_tagger": variant_tagger,
        "judge_prefer_enhanced": ranking_responder(tag_rank_key),
        "judge_lexicographic": ranking_responder(lambda t: t),
        "judge_positional": positional_responder(),
        "patient_grounded": grounded_patient,
    }
    default = spec.get("default")
    behavior = spec.get("behavior")
    if behavior is not None:
        if behavior.startswith("fixed:"):
            default = behavior[len("fixed:"):]
        elif behavior.startswith("confidence:"):
            default = confidence_responder(int(behavior.split(":", 1)[1]))
        elif behavior in behaviors:
            default = behaviors[behavior]
        else:
            raise ValueError(f"unknown mock behavior: {behavior!r}")
    backend = MockBackend(default=default, name=name)
    for rule in spec.get("rules", []):
        backend.script(rule["pattern"], rule["response"])
    if spec.get("responses"):
        backend.enqueue(*spec["responses"])
    return backend
