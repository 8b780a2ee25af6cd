"""Forum-thread corpus: ingestion, LLM decomposition, quality groups, splits.

A thread arrives as one JSON line (title, post body, ordered turns). It is
decomposed into atomic clinician questions, each carrying the exact
conversation context that preceded it, then bucketed into one of eight
proxy quality groups and sampled into overlap-free train/dev/test splits.
"""

from __future__ import annotations

import logging
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .gateway import CompletionRequest, CompletionResponse, GenParams
from .jsonl import dump_json, iter_lines, load_json
from .parsing import LLMOutputError, extract_json
from .prompts import render_prompt

logger = logging.getLogger(__name__)

CompleteFn = Callable[[CompletionRequest], CompletionResponse]

ROLE_TAGS = {"patient": "Patient", "responder": "Doctor"}

DECOMPOSE_PARAMS = GenParams(temperature=0.0, max_tokens=1024)


class CorpusError(Exception):
    pass


class IngestError(CorpusError):
    """One or more records failed ingestion; .errors lists them all."""

    def __init__(self, errors: list[str]):
        super().__init__("ingestion failed:\n" + "\n".join(errors))
        self.errors = errors


class DecompositionError(CorpusError):
    """Backend returned something the decomposition parser cannot use."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw[:300]!r}")
        self.raw = raw


class InfeasibleSplitError(CorpusError):
    def __init__(self, message: str, availability: dict):
        super().__init__(message)
        self.availability = availability


@dataclass(frozen=True)
class Turn:
    author_role: str            # patient | responder
    author_expert_verified: bool
    text: str

    def __post_init__(self):
        if self.author_role not in ROLE_TAGS:
            raise ValueError(f"invalid author_role: {self.author_role!r}")


@dataclass(frozen=True)
class ThreadRecord:
    thread_id: str
    post_id: str
    title: str
    post_body: str
    turns: tuple[Turn, ...]
    created_at: Optional[str] = None

    def __post_init__(self):
        if not self.turns:
            raise ValueError(f"thread {self.thread_id}: turns must be non-empty")
        if not self.post_body:
            raise ValueError(f"thread {self.thread_id}: post_body must be non-empty")

    @staticmethod
    def from_dict(d: dict) -> "ThreadRecord":
        turns = tuple(
            Turn(author_role=t["author_role"],
                 author_expert_verified=bool(t.get("author_expert_verified", False)),
                 text=t["text"])
            for t in d["turns"])
        return ThreadRecord(thread_id=str(d["thread_id"]), post_id=str(d["post_id"]),
                            title=d["title"], post_body=d["post_body"],
                            turns=turns, created_at=d.get("created_at"))

    def to_dict(self) -> dict:
        d = {
            "thread_id": self.thread_id,
            "post_id": self.post_id,
            "title": self.title,
            "post_body": self.post_body,
            "turns": [
                {"author_role": t.author_role,
                 "author_expert_verified": t.author_expert_verified,
                 "text": t.text}
                for t in self.turns
            ],
        }
        if self.created_at is not None:
            d["created_at"] = self.created_at
        return d


@dataclass(frozen=True)
class QuestionRecord:
    question_id: str
    thread_id: str
    post_id: str
    context: str
    question_text: str
    author_expert_verified: bool

    def __post_init__(self):
        if not self.question_text:
            raise ValueError(f"question {self.question_id}: empty question_text")

    @staticmethod
    def from_dict(d: dict) -> "QuestionRecord":
        return QuestionRecord(**{k: d[k] for k in (
            "question_id", "thread_id", "post_id", "context", "question_text",
            "author_expert_verified")})

    def to_dict(self) -> dict:
        return {
            "question_id": self.question_id,
            "thread_id": self.thread_id,
            "post_id": self.post_id,
            "context": self.context,
            "question_text": self.question_text,
            "author_expert_verified": self.author_expert_verified,
        }


@dataclass(frozen=True)
class ParsedThread:
    thread_id: str
    atomic_questions: tuple[QuestionRecord, ...]
    conclusion: Optional[str]
    positive_feedback: bool
    final_diagnosis: Optional[str] = None

    def __post_init__(self):
        if self.conclusion is not None and not self.conclusion:
            raise ValueError(f"thread {self.thread_id}: conclusion present but empty")

    @staticmethod
    def from_dict(d: dict) -> "ParsedThread":
        return ParsedThread(
            thread_id=d["thread_id"],
            atomic_questions=tuple(QuestionRecord.from_dict(q)
                                   for q in d["atomic_questions"]),
            conclusion=d.get("conclusion"),
            positive_feedback=bool(d.get("positive_feedback", False)),
            final_diagnosis=d.get("final_diagnosis"),
        )

    def to_dict(self) -> dict:
        return {
            "thread_id": self.thread_id,
            "atomic_questions": [q.to_dict() for q in self.atomic_questions],
            "conclusion": self.conclusion,
            "positive_feedback": self.positive_feedback,
            "final_diagnosis": self.final_diagnosis,
        }


@dataclass(frozen=True)
class QualityGroup:
    """Proxy quality signals; 2x2x2 makes exactly eight groups."""

    expert_author: bool
    has_conclusion: bool
    has_positive_feedback: bool

    def label(self) -> str:
        bits = [("expert" if self.expert_author else "lay"),
                ("concl" if self.has_conclusion else "noconcl"),
                ("fb" if self.has_positive_feedback else "nofb")]
        return "-".join(bits)


# Canonical group order used for quota assignment and round-robin
# redistribution; fixed so splits are reproducible.
ALL_QUALITY_GROUPS: tuple[QualityGroup, ...] = tuple(
    QualityGroup(e, c, f)
    for e in (True, False) for c in (True, False) for f in (True, False)
)


@dataclass
class Corpus:
    threads: list[ThreadRecord] = field(default_factory=list)
    ineligible: list[str] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.threads)

    def unique_posts(self) -> int:
        return len({t.post_id for t in self.threads})

    def by_id(self, thread_id: str) -> ThreadRecord:
        for t in self.threads:
            if t.thread_id == thread_id:
                return t
        raise KeyError(thread_id)


def _has_question_sentence(text: str) -> bool:
    return "?" in text


def thread_eligible(thread: ThreadRecord) -> bool:
    """A thread qualifies when its first responder turn asks something."""
    for turn in thread.turns:
        if turn.author_role == "responder":
            return _has_question_sentence(turn.text)
    return False


def ingest_threads(source: str | Path | Iterable[str],
                   require_question: bool = True) -> Corpus:
    """Parse a line-delimited thread export into a corpus.

    Malformed records are collected with their line numbers and reported
    together; a duplicated thread_id is rejected naming the id and both
    lines. Threads whose first responder turn asks no question are set
    aside (they produce no training questions).
    """
    import json

    corpus = Corpus()
    errors: list[str] = []
    seen: dict[str, int] = {}
    for lineno, line in iter_lines(source):
        stripped = line.strip()
        if not stripped:
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError as exc:
            errors.append(f"line {lineno}: invalid JSON ({exc.msg})")
            continue
        try:
            thread = ThreadRecord.from_dict(record)
        except (KeyError, TypeError, ValueError) as exc:
            errors.append(f"line {lineno}: malformed record ({exc})")
            continue
        if thread.thread_id in seen:
            errors.append(
                f"line {lineno}: duplicate thread_id {thread.thread_id!r} "
                f"(first seen on line {seen[thread.thread_id]})")
            continue
        seen[thread.thread_id] = lineno
        if require_question and not thread_eligible(thread):
            corpus.ineligible.append(thread.thread_id)
            continue
        corpus.threads.append(thread)
    if errors:
        raise IngestError(errors)
    logger.info("ingested %d threads (%d unique posts, %d ineligible)",
                len(corpus), corpus.unique_posts(), len(corpus.ineligible))
    return corpus


def serialize_thread(thread: ThreadRecord, upto: Optional[int] = None) -> str:
    """Canonical text layout: title, post, then role-tagged turns."""
    lines = [thread.title, thread.post_body]
    turns = thread.turns if upto is None else thread.turns[:upto]
    for turn in turns:
        lines.append(f"{ROLE_TAGS[turn.author_role]}: {turn.text}")
    return "\n".join(lines)


def context_before_turn(thread: ThreadRecord, turn_index: int) -> str:
    return serialize_thread(thread, upto=turn_index)


def decompose_thread(thread: ThreadRecord, llm: CompleteFn,
                     params: GenParams = DECOMPOSE_PARAMS) -> ParsedThread:
    """Ask the backend to split a thread into atomic questions and outcomes.

    Deterministic given a deterministic backend: the prompt depends only on
    the thread and the response is parsed without any sampling of our own.
    """
    prompt = render_prompt("decompose_thread",
                           {"thread_text": serialize_thread(thread)})
    resp = llm(params.request(user=prompt))
    try:
        data = extract_json(resp.text)
    except LLMOutputError as exc:
        raise DecompositionError("unparseable decomposition", exc.raw) from exc

    raw_questions = data.get("questions")
    if not isinstance(raw_questions, list):
        raise DecompositionError("decomposition lacks a questions list", resp.text)
    questions: list[QuestionRecord] = []
    for i, item in enumerate(raw_questions):
        try:
            turn_index = int(item["turn_index"])
            text = str(item["text"]).strip()
        except (KeyError, TypeError, ValueError):
            raise DecompositionError(
                f"question entry {i} malformed", resp.text) from None
        if not (0 <= turn_index < len(thread.turns)):
            raise DecompositionError(
                f"question entry {i} has turn_index {turn_index} outside the "
                f"thread's {len(thread.turns)} turns", resp.text)
        if not text:
            raise DecompositionError(f"question entry {i} has empty text",
                                     resp.text)
        questions.append(QuestionRecord(
            question_id=f"{thread.thread_id}:q{i}",
            thread_id=thread.thread_id,
            post_id=thread.post_id,
            context=context_before_turn(thread, turn_index),
            question_text=text,
            author_expert_verified=thread.turns[turn_index].author_expert_verified,
        ))

    conclusion = data.get("conclusion") or None
    final_diagnosis = data.get("final_diagnosis") or None
    return ParsedThread(
        thread_id=thread.thread_id,
        atomic_questions=tuple(questions),
        conclusion=conclusion,
        positive_feedback=bool(data.get("positive_feedback", False)),
        final_diagnosis=final_diagnosis,
    )


def assign_quality_group(q: QuestionRecord, parent: ParsedThread) -> QualityGroup:
    if q.thread_id != parent.thread_id:
        raise CorpusError(
            f"question {q.question_id} belongs to thread {q.thread_id!r}, "
            f"not {parent.thread_id!r}")
    return QualityGroup(
        expert_author=q.author_expert_verified,
        has_conclusion=parent.conclusion is not None,
        has_positive_feedback=parent.positive_feedback,
    )


def label_questions(parsed_threads: Sequence[ParsedThread]
                    ) -> list[tuple[QuestionRecord, QualityGroup]]:
    labeled = []
    for parsed in parsed_threads:
        for q in parsed.atomic_questions:
            labeled.append((q, assign_quality_group(q, parsed)))
    return labeled


@dataclass(frozen=True)
class SplitAssignment:
    train: tuple[str, ...]
    dev: tuple[str, ...]
    test: tuple[str, ...]
    seed: int

    def as_sets(self) -> dict[str, set[str]]:
        return {"train": set(self.train), "dev": set(self.dev),
                "test": set(self.test)}

    def save(self, path: str | Path) -> None:
        dump_json(path, {"seed": self.seed, "train": sorted(self.train),
                         "dev": sorted(self.dev), "test": sorted(self.test)})

    @staticmethod
    def load(path: str | Path) -> "SplitAssignment":
        d = load_json(path)
        return SplitAssignment(train=tuple(d["train"]), dev=tuple(d["dev"]),
                               test=tuple(d["test"]), seed=d["seed"])


def stratified_split(labeled: Sequence[tuple[QuestionRecord, QualityGroup]],
                     sizes: tuple[int, int, int], seed: int) -> SplitAssignment:
    """Draw train/dev/test question sets evenly across quality groups.

    Rules, in priority order:
      - exact requested sizes;
      - no post_id spans two splits;
      - test draws only from groups whose threads have conclusions;
      - per-split quotas are spread evenly over eligible groups, remainder
        and any group shortfall redistributed round-robin in canonical
        group order;
      - fully deterministic for a given seed.
    """
    train_n, dev_n, test_n = sizes
    if min(sizes) < 0:
        raise InfeasibleSplitError("split sizes must be non-negative", {})

    rng = random.Random(seed)
    pools: dict[QualityGroup, list[QuestionRecord]] = {g: [] for g in ALL_QUALITY_GROUPS}
    for q, g in labeled:
        pools[g].append(q)
    for g in ALL_QUALITY_GROUPS:
        pools[g].sort(key=lambda q: q.question_id)
        rng.shuffle(pools[g])

    post_claim: dict[str, str] = {}
    assignments: dict[str, list[str]] = {"train": [], "dev": [], "test": []}

    def availability() -> dict[str, int]:
        return {g.label(): len(pool) for g, pool in pools.items()}

    def take_one(group: QualityGroup, split: str) -> bool:
        pool = pools[group]
        for idx in range(len(pool) - 1, -1, -1):
            q = pool[idx]
            claimed = post_claim.get(q.post_id)
            if claimed is not None and claimed != split:
                continue
            pool.pop(idx)
            post_claim[q.post_id] = split
            assignments[split].append(q.question_id)
            return True
        return False

    def draw(split: str, size: int, eligible: Sequence[QualityGroup]) -> None:
        if size == 0:
            return
        base, remainder = divmod(size, len(eligible))
        quotas = {g: base + (1 if i < remainder else 0)
                  for i, g in enumerate(eligible)}
        deficit = 0
        for g in eligible:
            for _ in range(quotas[g]):
                if not take_one(g, split):
                    deficit += 1
        # Round-robin redistribution of shortfall across remaining groups.
        while deficit > 0:
            progressed = False
            for g in eligible:
                if deficit == 0:
                    break
                if take_one(g, split):
                    deficit -= 1
                    progressed = True
            if not progressed:
                raise InfeasibleSplitError(
                    f"cannot fill the {split} split: {deficit} short of "
                    f"{size} after exhausting eligible groups",
                    availability())

    conclusion_groups = [g for g in ALL_QUALITY_GROUPS if g.has_conclusion]
    draw("test", test_n, conclusion_groups)
    draw("dev", dev_n, list(ALL_QUALITY_GROUPS))
    draw("train", train_n, list(ALL_QUALITY_GROUPS))

    return SplitAssignment(train=tuple(sorted(assignments["train"])),
                           dev=tuple(sorted(assignments["dev"])),
                           test=tuple(sorted(assignments["test"])),
                           seed=seed)
