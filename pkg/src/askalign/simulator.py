"""Interactive patient-expert diagnostic simulation.

A scenario hides the full patient record behind a patient agent; the expert
agent sees only the initial information, decides each turn whether to keep
asking (1-5 self-rated confidence against a threshold), and finally answers
a four-option multiple choice inquiry. Accuracy of that final answer is the
benchmark signal for question quality.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Optional, Sequence

from .corpus import CompleteFn, ParsedThread, ThreadRecord, serialize_thread
from .gateway import GenParams
from .jsonl import read_jsonl, write_jsonl
from .parsing import (LLMOutputError, extract_json, parse_confidence,
                      parse_option_label, strip_wrapping)
from .prompts import render_prompt

logger = logging.getLogger(__name__)

OPTION_LABELS = ("A", "B", "C", "D")
CANNOT_ANSWER = "The patient cannot answer this question."
JSON_REMINDER = ("Your previous reply could not be used. Respond with valid "
                 "JSON only, exactly in the requested format.")

SIM_PARAMS = GenParams(temperature=0.6, max_tokens=512)

DEFAULT_MAX_TURNS = 15
DEFAULT_CONFIDENCE_THRESHOLD = 4


class SimulatorError(Exception):
    pass


class McqBuildError(SimulatorError):
    pass


@dataclass(frozen=True)
class ScenarioMCQ:
    scenario_id: str
    initial_info: str
    hidden_record: str
    inquiry: str
    options: Mapping[str, str]
    correct: str
    shuffle_seed: Optional[int] = None

    def __post_init__(self):
        if sorted(self.options) != list(OPTION_LABELS):
            raise SimulatorError(
                f"scenario {self.scenario_id}: options must be exactly A-D")
        if len(set(self.options.values())) != 4:
            raise SimulatorError(
                f"scenario {self.scenario_id}: options must be pairwise distinct")
        if self.correct not in self.options:
            raise SimulatorError(
                f"scenario {self.scenario_id}: correct label {self.correct!r} "
                "is not one of the options")

    def options_block(self) -> str:
        return "\n".join(f"{label}. {self.options[label]}"
                         for label in OPTION_LABELS)

    def to_dict(self) -> dict:
        d = {
            "scenario_id": self.scenario_id,
            "initial_info": self.initial_info,
            "hidden_record": self.hidden_record,
            "question": self.inquiry,
            "correct_answer": self.correct,
        }
        for label in OPTION_LABELS:
            d[f"option{label}"] = self.options[label]
        if self.shuffle_seed is not None:
            d["shuffle_seed"] = self.shuffle_seed
        return d

    @staticmethod
    def from_dict(d: dict) -> "ScenarioMCQ":
        return ScenarioMCQ(
            scenario_id=str(d["scenario_id"]),
            initial_info=d["initial_info"],
            hidden_record=d["hidden_record"],
            inquiry=d["question"],
            options={label: d[f"option{label}"] for label in OPTION_LABELS},
            correct=d["correct_answer"],
            shuffle_seed=d.get("shuffle_seed"),
        )


def save_scenarios(path: str | Path, scenarios: Sequence[ScenarioMCQ]) -> int:
    return write_jsonl(path, (s.to_dict() for s in scenarios))


def load_scenarios(path: str | Path) -> list[ScenarioMCQ]:
    return [ScenarioMCQ.from_dict(d) for _, d in read_jsonl(path)]


@dataclass
class EpisodeState:
    scenario_id: str
    qa_history: list[dict] = field(default_factory=list)

    @property
    def turn(self) -> int:
        return len(self.qa_history)

    def history_block(self) -> str:
        if not self.qa_history:
            return "(none yet)"
        lines = []
        for qa in self.qa_history:
            lines.append(f"Doctor: {qa['question']}")
            lines.append(f"Patient: {qa['answer']}")
        return "\n".join(lines)


@dataclass
class AbstentionDecision:
    action: str            # ask | answer
    confidence: int
    rationale: str


@dataclass
class AgentEndpoints:
    """Completion functions for each role in an episode."""

    question: CompleteFn
    decision: CompleteFn
    abstention: CompleteFn
    patient: CompleteFn


@dataclass
class EpisodeParams:
    max_turns: int = DEFAULT_MAX_TURNS
    confidence_threshold: int = DEFAULT_CONFIDENCE_THRESHOLD
    gen: GenParams = field(default_factory=lambda: SIM_PARAMS)


@dataclass
class EpisodeResult:
    scenario_id: str
    chosen: str
    correct: bool
    turns_used: int
    abstention_trace: list[int]
    transcript: list[dict]
    flagged: bool = False

    def to_dict(self) -> dict:
        return {
            "scenario_id": self.scenario_id,
            "chosen": self.chosen,
            "correct": self.correct,
            "turns_used": self.turns_used,
            "abstention_trace": self.abstention_trace,
            "transcript": self.transcript,
            "flagged": self.flagged,
        }

    @staticmethod
    def from_dict(d: dict) -> "EpisodeResult":
        return EpisodeResult(
            scenario_id=d["scenario_id"], chosen=d["chosen"],
            correct=d["correct"], turns_used=d["turns_used"],
            abstention_trace=list(d["abstention_trace"]),
            transcript=list(d["transcript"]), flagged=d.get("flagged", False))


def _json_call(llm: CompleteFn, params: GenParams, user: str,
               system: Optional[str] = None) -> dict:
    """One completion expected to be JSON, with a single reprompt."""
    last_raw = ""
    for attempt in range(2):
        suffix = "" if attempt == 0 else "\n\n" + JSON_REMINDER
        resp = llm(params.request(system=system, user=user + suffix))
        last_raw = resp.text
        try:
            return extract_json(resp.text)
        except LLMOutputError:
            continue
    raise McqBuildError(f"unparseable JSON after reprompt: {last_raw[:200]!r}")


def build_mcq_task(thread: ThreadRecord, parsed: ParsedThread, llm: CompleteFn,
                   seed: int = 0, params: GenParams = SIM_PARAMS) -> ScenarioMCQ:
    """Turn one concluded thread into a four-option diagnostic scenario.

    Three calls: extract the initial presentation, extract the inquiry and
    conclusion, then generate the options (the generation prompt includes
    its own revision pass). Options are shuffled with a recorded seed so
    correct answers spread across the four labels.
    """
    if parsed.thread_id != thread.thread_id:
        raise SimulatorError("parsed thread does not match the thread record")
    if parsed.conclusion is None:
        raise SimulatorError(
            f"thread {thread.thread_id} has no conclusion; only concluded "
            "threads can become scenarios")
    record = serialize_thread(thread)

    initial_resp = llm(params.request(
        user=render_prompt("mcq_initial_info", {"record": record})))
    initial_info = strip_wrapping(initial_resp.text)
    if not initial_info:
        raise McqBuildError("initial-info extraction returned empty text")

    inquiry_data = _json_call(llm, params, render_prompt(
        "mcq_inquiry", {"record": record}))
    inquiry = str(inquiry_data.get("inquiry") or "").strip()
    if not inquiry:
        raise McqBuildError("inquiry extraction returned no inquiry")
    conclusion = str(inquiry_data.get("conclusion") or parsed.conclusion)

    mcq_data = _json_call(
        llm, params,
        render_prompt("mcq_build_user", {
            "record": record,
            "inquiry": inquiry,
            "final_diagnosis": parsed.final_diagnosis or "not provided",
            "conclusion": conclusion,
        }),
        system=render_prompt("mcq_build_system", {}),
    )
    try:
        question = str(mcq_data["question"]).strip()
        options = {label: str(mcq_data[f"option{label}"]).strip()
                   for label in OPTION_LABELS}
        correct = str(mcq_data["correct_answer"]).strip().upper()
    except KeyError as exc:
        raise McqBuildError(f"MCQ response missing key {exc}") from None
    if correct not in OPTION_LABELS:
        raise McqBuildError(
            f"correct_answer must be one of {OPTION_LABELS}, got {correct!r}")
    if len(set(options.values())) != 4:
        raise McqBuildError("duplicate option texts in MCQ response")

    # Shuffle with a recorded seed so the correct label's position varies
    # but remains reproducible.
    rng = random.Random(seed)
    texts = [options[label] for label in OPTION_LABELS]
    correct_text = options[correct]
    rng.shuffle(texts)
    shuffled = dict(zip(OPTION_LABELS, texts))
    new_correct = next(label for label, text in shuffled.items()
                       if text == correct_text)

    return ScenarioMCQ(
        scenario_id=thread.thread_id,
        initial_info=initial_info,
        hidden_record=record,
        inquiry=question,
        options=shuffled,
        correct=new_correct,
        shuffle_seed=seed,
    )


def build_mcq_tasks(pairs: Sequence[tuple[ThreadRecord, ParsedThread]],
                    llm: CompleteFn, seed: int = 0,
                    params: GenParams = SIM_PARAMS) -> list[ScenarioMCQ]:
    """Build scenarios for every concluded thread; per-thread seeds derive
    from the base seed so option shuffles differ across scenarios."""
    scenarios = []
    for i, (thread, parsed) in enumerate(pairs):
        if parsed.conclusion is None:
            continue
        scenarios.append(build_mcq_task(thread, parsed, llm,
                                        seed=seed + i, params=params))
    return scenarios


def patient_answer(scenario: ScenarioMCQ, question: str, llm: CompleteFn,
                   params: GenParams = SIM_PARAMS) -> str:
    """Answer strictly from the hidden record; a fixed sentence signals
    that the record does not contain the information."""
    if not question.strip():
        raise SimulatorError("patient_answer requires a non-empty question")
    prompt = render_prompt("patient_answer", {
        "record": scenario.hidden_record, "question": question})
    resp = llm(params.request(user=prompt))
    return resp.text.strip()


def abstain_decision(initial_info: str, state: EpisodeState, llm: CompleteFn,
                     threshold: int = DEFAULT_CONFIDENCE_THRESHOLD,
                     params: GenParams = SIM_PARAMS) -> AbstentionDecision:
    """Self-rated 1-5 confidence with rationale; answer at or above the
    threshold. An unparseable scale after one reprompt counts as minimum
    confidence (keep asking)."""
    prompt = render_prompt("abstention", {
        "initial_info": initial_info, "qa_history": state.history_block()})
    confidence = None
    rationale = ""
    for attempt in range(2):
        suffix = "" if attempt == 0 else (
            "\n\nYour previous reply was missing the scale. End with "
            "'Confidence: <1-5>'.")
        resp = llm(params.request(user=prompt + suffix))
        confidence = parse_confidence(resp.text)
        if confidence is not None:
            rationale = resp.text.strip()
            break
    if confidence is None:
        logger.warning("abstention scale unparseable; treating as minimum")
        confidence = 1
    action = "answer" if confidence >= threshold else "ask"
    return AbstentionDecision(action=action, confidence=confidence,
                              rationale=rationale)


def _decide(scenario: ScenarioMCQ, state: EpisodeState,
            llm: CompleteFn, params: GenParams) -> tuple[str, bool]:
    """Final option choice; an invalid label after a reprompt is scored
    incorrect and flagged."""
    prompt = render_prompt("decision", {
        "initial_info": scenario.initial_info,
        "qa_history": state.history_block(),
        "inquiry": scenario.inquiry,
        "options_block": scenario.options_block(),
    })
    for attempt in range(2):
        suffix = "" if attempt == 0 else (
            "\n\nReply with a single letter A, B, C, or D.")
        resp = llm(params.request(user=prompt + suffix))
        label = parse_option_label(resp.text)
        if label is not None:
            return label, False
    logger.warning("decision output invalid for %s; scoring incorrect",
                   scenario.scenario_id)
    return "", True


def run_episode(scenario: ScenarioMCQ, agents: AgentEndpoints,
                params: Optional[EpisodeParams] = None) -> EpisodeResult:
    """One full interaction: abstain/ask loop, then a forced decision.

    Terminates in at most max_turns asks plus one decision; with
    deterministic backends the whole transcript is deterministic.
    """
    params = params or EpisodeParams()
    state = EpisodeState(scenario_id=scenario.scenario_id)
    trace: list[int] = []
    transcript: list[dict] = []

    while True:
        if state.turn >= params.max_turns:
            transcript.append({"event": "forced_answer",
                               "turn": state.turn})
            break
        decision = abstain_decision(scenario.initial_info, state,
                                    agents.abstention,
                                    threshold=params.confidence_threshold,
                                    params=params.gen)
        trace.append(decision.confidence)
        transcript.append({"event": "abstention", "turn": state.turn,
                           "confidence": decision.confidence,
                           "action": decision.action,
                           "rationale": decision.rationale})
        if decision.action == "answer":
            break
        question_resp = agents.question(params.gen.request(
            user=render_prompt("ask_question", {
                "initial_info": scenario.initial_info,
                "qa_history": state.history_block()})))
        question = strip_wrapping(question_resp.text)
        answer = patient_answer(scenario, question, agents.patient,
                                params=params.gen)
        state.qa_history.append({"question": question, "answer": answer})
        transcript.append({"event": "exchange", "turn": state.turn,
                           "question": question, "answer": answer})

    chosen, flagged = _decide(scenario, state, agents.decision, params.gen)
    transcript.append({"event": "decision", "chosen": chosen,
                       "correct_answer": scenario.correct})
    return EpisodeResult(
        scenario_id=scenario.scenario_id,
        chosen=chosen,
        correct=(chosen == scenario.correct),
        turns_used=state.turn,
        abstention_trace=trace,
        transcript=transcript,
        flagged=flagged,
    )


@dataclass
class BenchmarkResult:
    accuracy: float
    results: list[EpisodeResult]
    failures: list[dict] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "episodes": len(self.results),
            "failures": len(self.failures),
            "correct": sum(1 for r in self.results if r.correct),
        }


def run_benchmark(scenarios: Sequence[ScenarioMCQ], agents: AgentEndpoints,
                  params: Optional[EpisodeParams] = None,
                  results_path: Optional[str | Path] = None,
                  resume: bool = False) -> BenchmarkResult:
    """Run every scenario and report accuracy as a percentage.

    Per-episode failures are recorded and excluded from the denominator.
    With a results path and resume=True, already-completed scenarios are
    skipped, making interrupted runs cheap to restart.
    """
    if not scenarios:
        raise SimulatorError("run_benchmark needs at least one scenario")
    params = params or EpisodeParams()

    done: dict[str, EpisodeResult] = {}
    if resume and results_path and Path(results_path).exists():
        for _, d in read_jsonl(results_path):
            result = EpisodeResult.from_dict(d)
            done[result.scenario_id] = result

    results: list[EpisodeResult] = []
    failures: list[dict] = []
    for scenario in scenarios:
        if scenario.scenario_id in done:
            results.append(done[scenario.scenario_id])
            continue
        try:
            results.append(run_episode(scenario, agents, params))
        except Exception as exc:  # noqa: BLE001 - benchmark isolates episodes
            failures.append({"scenario_id": scenario.scenario_id,
                             "error": str(exc)})
            logger.warning("episode failed for %s: %s",
                           scenario.scenario_id, exc)

    if results_path is not None:
        write_jsonl(results_path, (r.to_dict() for r in results))

    correct = sum(1 for r in results if r.correct)
    accuracy = 100.0 * correct / len(results) if results else 0.0
    return BenchmarkResult(accuracy=accuracy, results=results,
                           failures=failures)
