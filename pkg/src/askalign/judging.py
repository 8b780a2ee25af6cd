"""Order-permuted LLM judging and direction-consistency filtering.

Candidates are shown to the judge under neutral labels (A/B/C) in more than
one presentation order, the strict ">" rankings are mapped back to the
underlying candidates, and a synthesized pair is kept only when every
verdict agrees with its intended direction. Unanimity across orders is the
strictest reading and keeps positional bias out of the surviving data.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

from .corpus import CompleteFn
from .gateway import GenParams
from .parsing import LLMOutputError, extract_json
from .prompts import (JUDGE_FORMAT_REMINDER, build_dimension_block,
                      render_prompt)
from .synthesis import PairSet, PairType, PreferencePair

logger = logging.getLogger(__name__)

JUDGE_PARAMS = GenParams(temperature=0.0, max_tokens=1024)

LABELS = ("A", "B", "C")

# Which candidate roles a pair type compares: (chosen role, rejected role).
PAIR_ROLES: dict[PairType, tuple[str, str]] = {
    PairType.EO: ("enhanced", "original"),
    PairType.EC: ("enhanced", "corrupted"),
    PairType.OC: ("original", "corrupted"),
}


class JudgeError(Exception):
    pass


class JudgeParseError(JudgeError):
    """Judge output unusable after a reprompt; carries the raw response."""

    def __init__(self, message: str, raw: str):
        super().__init__(f"{message}: {raw[:300]!r}")
        self.raw = raw


class MissingVerdictsError(JudgeError):
    pass


class UnjudgedPairsError(JudgeError):
    def __init__(self, count: int):
        super().__init__(f"{count} pairs have no kept decision; judge them first")
        self.count = count


@dataclass(frozen=True)
class JudgeVerdict:
    """One ranking from one presentation order, resolved to candidate ids."""

    dimension: str
    presentation_order: tuple[str, ...]   # candidate ids as shown (label A first)
    ranking: tuple[str, ...]              # labels, best first
    ranked_candidates: tuple[str, ...]    # candidate ids, best first
    reasoning: str = ""
    judge_endpoint: str = "default"

    def prefers(self, winner_id: str, loser_id: str) -> Optional[bool]:
        """True/False if both candidates were ranked, else None."""
        if winner_id not in self.ranked_candidates or \
                loser_id not in self.ranked_candidates:
            return None
        return (self.ranked_candidates.index(winner_id)
                < self.ranked_candidates.index(loser_id))

    def to_dict(self) -> dict:
        return {
            "dimension": self.dimension,
            "presentation_order": list(self.presentation_order),
            "ranking": list(self.ranking),
            "ranked_candidates": list(self.ranked_candidates),
            "reasoning": self.reasoning,
            "judge_endpoint": self.judge_endpoint,
        }

    @staticmethod
    def from_dict(d: dict) -> "JudgeVerdict":
        return JudgeVerdict(
            dimension=d["dimension"],
            presentation_order=tuple(d["presentation_order"]),
            ranking=tuple(d["ranking"]),
            ranked_candidates=tuple(d["ranked_candidates"]),
            reasoning=d.get("reasoning", ""),
            judge_endpoint=d.get("judge_endpoint", "default"),
        )


def _parse_ranking(data: dict, dimension: str, labels: Sequence[str],
                   raw: str) -> tuple[tuple[str, ...], str]:
    """Pull (ranking labels, reasoning) for one dimension out of judge JSON."""
    entry = data.get(dimension)
    if entry is None:
        # Tolerate case differences, or a single-dimension response under
        # a different key.
        for key, value in data.items():
            if key.lower() == dimension.lower():
                entry = value
                break
        else:
            if len(data) == 1:
                entry = next(iter(data.values()))
    if not isinstance(entry, dict) or "ranking" not in entry:
        raise LLMOutputError(f"no ranking for dimension {dimension!r}", raw)
    ranking_str = str(entry["ranking"])
    if "=" in ranking_str:
        raise LLMOutputError("tie in ranking (ties are forbidden)", raw)
    parts = [p.strip() for p in ranking_str.split(">")]
    if sorted(parts) != sorted(labels):
        raise LLMOutputError(
            f"ranking {ranking_str!r} is not a strict order over {list(labels)}",
            raw)
    return tuple(parts), str(entry.get("reasoning", ""))


def default_orders(n: int) -> list[tuple[int, ...]]:
    """Presentation orders: both orders for pairs, two rotations for triples."""
    if n == 2:
        return [(0, 1), (1, 0)]
    if n == 3:
        return [(0, 1, 2), (1, 2, 0)]
    raise JudgeError(f"unsupported candidate count: {n}")


def compare_candidates(context: str,
                       candidates: Sequence[tuple[str, str]],
                       dimension: str,
                       llm: CompleteFn,
                       aux: Optional[Mapping[str, str]] = None,
                       orders: Optional[Sequence[tuple[int, ...]]] = None,
                       params: GenParams = JUDGE_PARAMS) -> list[JudgeVerdict]:
    """Judge 2 or 3 labeled candidates under permuted presentation orders.

    candidates are (candidate_id, text) with distinct texts. One verdict is
    returned per presentation order; an unparseable response gets a single
    reprompt with a format reminder before raising.
    """
    if len(candidates) not in (2, 3):
        raise JudgeError("compare_candidates takes 2 or 3 candidates")
    texts = [text for _, text in candidates]
    if len(set(texts)) != len(texts):
        raise JudgeError("candidates must be pairwise distinct")
    ids = [cid for cid, _ in candidates]
    if len(set(ids)) != len(ids):
        raise JudgeError("candidate ids must be unique")

    n = len(candidates)
    use_orders = list(orders) if orders is not None else default_orders(n)
    labels = LABELS[:n]
    aux = dict(aux or {})
    system_id = "judge_system_pair" if n == 2 else "judge_system_triplet"
    user_id = "judge_user_pair" if n == 2 else "judge_user_triplet"

    verdicts: list[JudgeVerdict] = []
    for order in use_orders:
        if sorted(order) != list(range(n)):
            raise JudgeError(f"order {order} is not a permutation of 0..{n - 1}")
        presented_ids = tuple(ids[i] for i in order)
        variables = {
            "prev_context": context,
            "dimensions": build_dimension_block(dimension),
            "final_diagnosis": aux.get("final_diagnosis") or "not provided",
            "conclusion": aux.get("conclusion") or "not provided",
        }
        for label, idx in zip(labels, order):
            variables[f"question_{label.lower()}"] = candidates[idx][1]
        system = render_prompt(system_id, {})
        user = render_prompt(user_id, variables)

        ranking: Optional[tuple[str, ...]] = None
        reasoning = ""
        last_raw = ""
        for attempt in range(2):
            suffix = "" if attempt == 0 else "\n\n" + JUDGE_FORMAT_REMINDER
            resp = llm(params.request(system=system, user=user + suffix))
            last_raw = resp.text
            try:
                data = extract_json(resp.text)
                ranking, reasoning = _parse_ranking(data, dimension, labels,
                                                    resp.text)
                break
            except LLMOutputError as exc:
                logger.debug("judge parse failure (attempt %d): %s",
                             attempt + 1, exc)
        if ranking is None:
            raise JudgeParseError("judge output unparseable after reprompt",
                                  last_raw)
        by_label = dict(zip(labels, presented_ids))
        verdicts.append(JudgeVerdict(
            dimension=dimension,
            presentation_order=presented_ids,
            ranking=ranking,
            ranked_candidates=tuple(by_label[lbl] for lbl in ranking),
            reasoning=reasoning,
            judge_endpoint=params.model,
        ))
    return verdicts


def verify_direction(pair: PreferencePair,
                     verdicts: Sequence[JudgeVerdict]) -> bool:
    """Keep a pair only if every verdict agrees with its intended direction.

    Unanimous across presentation orders: adding a verdict can flip kept
    from True to False, never the other way.
    """
    chosen_role, rejected_role = PAIR_ROLES[pair.pair_type]
    outcomes = []
    for v in verdicts:
        if v.dimension != pair.attribute.value:
            continue
        pref = v.prefers(chosen_role, rejected_role)
        if pref is not None:
            outcomes.append(pref)
    if not outcomes:
        raise MissingVerdictsError(
            f"no verdict covers pair {pair.pair_id} "
            f"({chosen_role} vs {rejected_role}, {pair.attribute.value})")
    pair.kept = all(outcomes)
    return pair.kept


def judge_pairset(pairset: PairSet, llm: CompleteFn,
                  aux_by_question: Optional[Mapping[str, Mapping[str, str]]] = None,
                  orders: Optional[Sequence[tuple[int, ...]]] = None,
                  params: GenParams = JUDGE_PARAMS,
                  triplet: bool = True) -> list[dict]:
    """Judge every pair in a set, filling verdicts and kept flags in place.

    When a (question, attribute) group has all three pair types, the triple
    is judged in one 3-way prompt per presentation order and the pairwise
    outcomes are derived from the ranking; stragglers fall back to pairwise
    prompts. Returns the list of per-group failures.
    """
    aux_by_question = aux_by_question or {}
    groups: dict[tuple[str, str], list[PreferencePair]] = {}
    for pair in pairset.pairs:
        groups.setdefault((pair.question_id, pair.attribute.value), []).append(pair)

    failures: list[dict] = []
    for (question_id, attr), group in sorted(groups.items()):
        aux = aux_by_question.get(question_id)
        by_type = {p.pair_type: p for p in group}
        try:
            if triplet and set(by_type) == {PairType.EO, PairType.EC, PairType.OC}:
                e = by_type[PairType.EO].chosen
                o = by_type[PairType.EO].rejected
                c = by_type[PairType.EC].rejected
                candidates = [("enhanced", e), ("original", o), ("corrupted", c)]
                verdicts = compare_candidates(group[0].context, candidates,
                                              attr, llm, aux=aux,
                                              orders=orders, params=params)
                for pair in group:
                    pair.verdicts = [v.to_dict() for v in verdicts]
                    verify_direction(pair, verdicts)
            else:
                for pair in group:
                    roles = PAIR_ROLES[pair.pair_type]
                    candidates = [(roles[0], pair.chosen), (roles[1], pair.rejected)]
                    verdicts = compare_candidates(pair.context, candidates,
                                                  attr, llm, aux=aux,
                                                  orders=None, params=params)
                    pair.verdicts = [v.to_dict() for v in verdicts]
                    verify_direction(pair, verdicts)
        except JudgeError as exc:
            failures.append({"question_id": question_id, "attribute": attr,
                             "error": str(exc)})
            logger.warning("judging failed for %s/%s: %s", question_id, attr, exc)
    return failures


@dataclass
class RetentionReport:
    """Kept/total per (attribute x pair_type) plus the global fraction."""

    cells: dict[tuple[str, str], tuple[int, int]] = field(default_factory=dict)

    def kept_fraction(self, attribute: str, pair_type: str) -> float:
        total, kept = self.cells[(attribute, pair_type)]
        return kept / total if total else 0.0

    @property
    def total(self) -> int:
        return sum(t for t, _ in self.cells.values())

    @property
    def kept(self) -> int:
        return sum(k for _, k in self.cells.values())

    @property
    def global_kept_fraction(self) -> float:
        return self.kept / self.total if self.total else 0.0

    def to_dict(self) -> dict:
        rows = {}
        for (attr, pair_type), (total, kept) in sorted(self.cells.items()):
            rows.setdefault(attr, {})[pair_type] = {
                "total": total, "kept": kept,
                "kept_fraction": kept / total if total else 0.0,
            }
        return {
            "per_cell": rows,
            "total": self.total,
            "kept": self.kept,
            "global_kept_fraction": self.global_kept_fraction,
        }

    def to_text(self) -> str:
        attrs = sorted({attr for attr, _ in self.cells})
        pair_types = [t.value for t in PairType]
        header = f"{'Attribute':<22}" + "".join(f"{'E-C' if t == 'EC' else 'E-O' if t == 'EO' else 'O-C':>8}" for t in ("EC", "EO", "OC")) + f"{'Kept':>8}"
        lines = [header]
        for attr in attrs:
            row = f"{attr:<22}"
            kept_attr = total_attr = 0
            for pt in ("EC", "EO", "OC"):
                total, kept = self.cells.get((attr, pt), (0, 0))
                pct = 100.0 * kept / total if total else 0.0
                row += f"{pct:>8.1f}"
                kept_attr += kept
                total_attr += total
            row += f"{kept_attr:>8d}"
            lines.append(row)
        lines.append(f"global kept: {100.0 * self.global_kept_fraction:.1f}%")
        return "\n".join(lines)


def retention_report(pairset: PairSet) -> RetentionReport:
    """Tally kept fractions; every pair must already carry a kept decision."""
    unjudged = sum(1 for p in pairset.pairs if p.kept is None)
    if unjudged:
        raise UnjudgedPairsError(unjudged)
    report = RetentionReport()
    for pair in pairset.pairs:
        key = (pair.attribute.value, pair.pair_type.value)
        total, kept = report.cells.get(key, (0, 0))
        report.cells[key] = (total + 1, kept + (1 if pair.kept else 0))
    return report


def predicted_kept_count(n_questions: int,
                         retention_percents: Mapping[str, float]) -> float:
    """Expected surviving pairs for one attribute from per-type retention.

    Each question contributes one pair per type before filtering, so the
    expectation is n * sum of the per-type kept fractions.
    """
    return n_questions * sum(p / 100.0 for p in retention_percents.values())


def global_filtered_percent(retention_percents: Mapping[str, float]) -> float:
    """Percent of pairs removed, from per-type kept percentages.

    Assumes equal pre-filter counts per pair type, which holds by
    construction (one pair of each type per question).
    """
    values = list(retention_percents.values())
    return 100.0 - sum(values) / len(values)
