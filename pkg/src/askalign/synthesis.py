"""Counterfactual question synthesis: attribute-directed variants and pairs.

For every (question, attribute) the generator writes one improved and one
degraded rewrite, giving three preference pairs per question per attribute:
improved-vs-original, improved-vs-degraded, original-vs-degraded. The better
member is always listed as chosen; a later judging pass decides which pairs
survive.
"""

from __future__ import annotations

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Callable, Iterable, Optional, Sequence

from .corpus import CompleteFn, QuestionRecord
from .gateway import GenParams
from .jsonl import read_jsonl, write_jsonl
from .parsing import strip_wrapping
from .prompts import build_perturbation_instruction, render_prompt

logger = logging.getLogger(__name__)

PERTURB_PARAMS = GenParams(temperature=1.0, max_tokens=512)


class SynthesisError(Exception):
    pass


class DegenerateVariantError(SynthesisError):
    """The generator returned an empty or unchanged rewrite twice."""


class Attribute(str, Enum):
    CLARITY = "clarity"
    FOCUS = "focus"
    ANSWERABILITY = "answerability"
    MEDICAL_ACCURACY = "medical_accuracy"
    DIAGNOSTIC_RELEVANCE = "diagnostic_relevance"
    AVOID_DDX_BIAS = "avoid_ddx_bias"
    COARSE = "coarse"

    @property
    def group(self) -> str:
        if self in (Attribute.CLARITY, Attribute.FOCUS, Attribute.ANSWERABILITY):
            return "general"
        if self is Attribute.COARSE:
            return "coarse"
        return "clinical"


GENERAL_ATTRIBUTES = (Attribute.CLARITY, Attribute.FOCUS, Attribute.ANSWERABILITY)
CLINICAL_ATTRIBUTES = (Attribute.MEDICAL_ACCURACY, Attribute.DIAGNOSTIC_RELEVANCE,
                       Attribute.AVOID_DDX_BIAS)
SIX_ATTRIBUTES = GENERAL_ATTRIBUTES + CLINICAL_ATTRIBUTES

ATTRIBUTE_GROUPS = {
    "general": GENERAL_ATTRIBUTES,
    "clinical": CLINICAL_ATTRIBUTES,
    "all": SIX_ATTRIBUTES,
}


def parse_attributes(names: Iterable[str]) -> tuple[Attribute, ...]:
    """Resolve attribute names or group names ('general', 'clinical', 'all')."""
    out: list[Attribute] = []
    for name in names:
        if name in ATTRIBUTE_GROUPS:
            for attr in ATTRIBUTE_GROUPS[name]:
                if attr not in out:
                    out.append(attr)
            continue
        attr = Attribute(name)
        if attr not in out:
            out.append(attr)
    return tuple(out)


class Direction(str, Enum):
    ENHANCED = "enhanced"
    CORRUPTED = "corrupted"


class PairType(str, Enum):
    EO = "EO"   # enhanced vs original
    EC = "EC"   # enhanced vs corrupted
    OC = "OC"   # original vs corrupted


@dataclass(frozen=True)
class VariantQuestion:
    variant_id: str
    source_question_id: str
    attribute: Attribute
    direction: Direction
    text: str
    generator_endpoint: str = "default"

    def __post_init__(self):
        if not self.text:
            raise ValueError(f"variant {self.variant_id}: empty text")


@dataclass
class PreferencePair:
    pair_id: str
    context: str
    chosen: str
    rejected: str
    attribute: Attribute
    pair_type: PairType
    question_id: str
    verdicts: list[dict] = field(default_factory=list)
    kept: Optional[bool] = None

    def __post_init__(self):
        if self.chosen == self.rejected:
            raise SynthesisError(
                f"pair {self.pair_id}: chosen and rejected are identical")

    def to_dict(self) -> dict:
        return {
            "pair_id": self.pair_id,
            "context": self.context,
            "chosen": self.chosen,
            "rejected": self.rejected,
            "attribute": self.attribute.value,
            "pair_type": self.pair_type.value,
            "question_id": self.question_id,
            "verdicts": self.verdicts,
            "kept": self.kept,
        }

    @staticmethod
    def from_dict(d: dict) -> "PreferencePair":
        return PreferencePair(
            pair_id=d["pair_id"], context=d["context"], chosen=d["chosen"],
            rejected=d["rejected"], attribute=Attribute(d["attribute"]),
            pair_type=PairType(d["pair_type"]), question_id=d["question_id"],
            verdicts=list(d.get("verdicts", [])), kept=d.get("kept"))


def _split_context(context: str) -> tuple[str, str]:
    # Canonical contexts put the title on the first line.
    title, _, rest = context.partition("\n")
    return title, rest


def perturb(q: QuestionRecord, attribute: Attribute, direction: Direction,
            llm: CompleteFn, params: GenParams = PERTURB_PARAMS) -> VariantQuestion:
    """Generate one rewritten variant of a question along one attribute.

    The prompt embeds the attribute definition and its five scale anchors so
    the generator moves exactly one property. An empty or unchanged rewrite
    is retried once, then rejected: identical pairs teach nothing.
    """
    title, post = _split_context(q.context)
    instruction = build_perturbation_instruction(attribute.value, direction.value)
    prompt = render_prompt("perturbation", {
        "title": title, "post": post, "question": q.question_text,
        "instruction_block": instruction,
    })
    text = ""
    for _ in range(2):
        resp = llm(params.request(user=prompt))
        text = strip_wrapping(resp.text)
        if text and text != q.question_text:
            break
    else:
        raise DegenerateVariantError(
            f"degenerate variant for {q.question_id} "
            f"({attribute.value}/{direction.value})")
    suffix = "enh" if direction is Direction.ENHANCED else "cor"
    return VariantQuestion(
        variant_id=f"{q.question_id}:{attribute.value}:{suffix}",
        source_question_id=q.question_id,
        attribute=attribute,
        direction=direction,
        text=text,
        generator_endpoint=params.model,
    )


def build_pairs(q: QuestionRecord, enhanced: VariantQuestion,
                corrupted: VariantQuestion) -> list[PreferencePair]:
    """Assemble the three preference pairs for one question and attribute.

    Orientation is fixed by construction: the member with the higher
    intended attribute value is chosen (EO: enhanced over original,
    EC: enhanced over corrupted, OC: original over corrupted).
    """
    if enhanced.attribute != corrupted.attribute:
        raise SynthesisError(
            f"attribute mismatch: {enhanced.attribute} vs {corrupted.attribute}")
    if enhanced.direction is not Direction.ENHANCED or \
            corrupted.direction is not Direction.CORRUPTED:
        raise SynthesisError("variants passed in the wrong direction slots")
    for v in (enhanced, corrupted):
        if v.source_question_id != q.question_id:
            raise SynthesisError(
                f"variant {v.variant_id} does not derive from {q.question_id}")
    attr = enhanced.attribute
    members = {
        PairType.EO: (enhanced.text, q.question_text),
        PairType.EC: (enhanced.text, corrupted.text),
        PairType.OC: (q.question_text, corrupted.text),
    }
    pairs = []
    for pair_type, (chosen, rejected) in members.items():
        pairs.append(PreferencePair(
            pair_id=f"{q.question_id}:{attr.value}:{pair_type.value}",
            context=q.context,
            chosen=chosen,
            rejected=rejected,
            attribute=attr,
            pair_type=pair_type,
            question_id=q.question_id,
        ))
    return pairs


@dataclass
class PairSet:
    pairs: list[PreferencePair] = field(default_factory=list)
    failures: list[dict] = field(default_factory=list)

    def __len__(self) -> int:
        return len(self.pairs)

    def counts(self) -> dict[str, dict[str, int]]:
        """Pair counts per attribute x pair_type."""
        out: dict[str, dict[str, int]] = {}
        for p in self.pairs:
            cell = out.setdefault(p.attribute.value, {t.value: 0 for t in PairType})
            cell[p.pair_type.value] += 1
        return out

    def manifest(self) -> dict:
        return {
            "total_pairs": len(self.pairs),
            "counts": self.counts(),
            "failures": len(self.failures),
        }

    def save(self, path: str | Path) -> int:
        ordered = sorted(self.pairs, key=lambda p: p.pair_id)
        return write_jsonl(path, (p.to_dict() for p in ordered))

    @staticmethod
    def load(path: str | Path) -> "PairSet":
        pairs = [PreferencePair.from_dict(d) for _, d in read_jsonl(path)]
        return PairSet(pairs=pairs)


def synthesize_pairs(q: QuestionRecord, attribute: Attribute, llm: CompleteFn,
                     params: GenParams = PERTURB_PARAMS) -> list[PreferencePair]:
    enhanced = perturb(q, attribute, Direction.ENHANCED, llm, params)
    corrupted = perturb(q, attribute, Direction.CORRUPTED, llm, params)
    return build_pairs(q, enhanced, corrupted)


def synthesize_corpus(questions: Sequence[QuestionRecord],
                      attributes: Sequence[Attribute],
                      llm: CompleteFn,
                      params: GenParams = PERTURB_PARAMS,
                      max_workers: int = 1,
                      on_item: Optional[Callable[[str], None]] = None) -> PairSet:
    """Synthesize pairs for every (question, attribute) combination.

    Per-item failures are collected and the run continues. Generation is
    independent per item, so it parallelizes; assembly sorts by pair_id so
    the resulting set is deterministic regardless of completion order.
    Passing a caching completion function makes interrupted runs resumable
    for free.
    """
    if not questions or not attributes:
        raise SynthesisError("questions and attributes must be non-empty")

    items = [(q, attr) for q in questions for attr in attributes]
    result = PairSet()

    def run_item(item):
        q, attr = item
        return synthesize_pairs(q, attr, llm, params)

    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            outcomes = list(pool.map(lambda it: _guard(run_item, it), items))
    else:
        outcomes = [_guard(run_item, item) for item in items]

    for (q, attr), outcome in zip(items, outcomes):
        if isinstance(outcome, Exception):
            result.failures.append({
                "question_id": q.question_id,
                "attribute": attr.value,
                "error": str(outcome),
            })
            logger.warning("synthesis failed for %s/%s: %s",
                           q.question_id, attr.value, outcome)
        else:
            result.pairs.extend(outcome)
        if on_item:
            on_item(q.question_id)

    result.pairs.sort(key=lambda p: p.pair_id)
    return result


def _guard(fn, item):
    try:
        return fn(item)
    except Exception as exc:  # noqa: BLE001 - per-item isolation by design
        return exc
