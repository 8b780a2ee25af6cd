"""Annotation task and submission storage.

Line-delimited append-only persistence with an in-memory index; every write
happens under one lock, so concurrent submissions are atomic and task
assignment is a compare-and-set. Resubmission replaces the live record but
the log keeps every version for auditing.

Ranking candidates are shuffled per task with a recorded seed, and the
mapping from display label to source system never enters an annotator-facing
payload: annotators rank blind.
"""

from __future__ import annotations

import logging
import random
import threading
import time
import uuid
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional, Sequence

from ..jsonl import read_jsonl
from ..stats import RatingsMatrix

logger = logging.getLogger(__name__)

DEFAULT_ANNOTATOR_CAP = 3
DEFAULT_SCREENING_THRESHOLD = 3
NONE_OF_THE_ABOVE = "none_of_the_above"
MCQ_SELECTIONS = ("A", "B", "C", "D", NONE_OF_THE_ABOVE)


class AnnotationError(Exception):
    pass


class AuthError(AnnotationError):
    pass


class SubmissionError(AnnotationError):
    pass


@dataclass
class ScreeningRecord:
    annotator_id: str
    answers: list[str]
    score: int
    passed: bool

    def to_dict(self) -> dict:
        return {"annotator_id": self.annotator_id, "answers": self.answers,
                "score": self.score, "passed": self.passed}


@dataclass
class RankingTask:
    task_id: str
    context: str
    candidates: list[dict]          # [{label, text}] in presented order
    source_map: dict[str, str]      # label -> system id; never shown
    shuffle_seed: int

    def annotator_payload(self) -> dict:
        """What an annotator sees; provenance stays out."""
        return {
            "task_id": self.task_id,
            "kind": "ranking",
            "context": self.context,
            "candidates": [dict(c) for c in self.candidates],
        }

    def labels(self) -> list[str]:
        return [c["label"] for c in self.candidates]

    def to_dict(self) -> dict:
        return {"kind": "ranking", "task_id": self.task_id,
                "context": self.context, "candidates": self.candidates,
                "source_map": self.source_map,
                "shuffle_seed": self.shuffle_seed}


@dataclass
class McqValidationTask:
    task_id: str
    question: str
    options: dict[str, str]
    generated_correct: str          # hidden from annotators

    def annotator_payload(self) -> dict:
        return {
            "task_id": self.task_id,
            "kind": "mcq_validation",
            "question": self.question,
            "options": dict(self.options),
            "none_option": NONE_OF_THE_ABOVE,
        }

    def to_dict(self) -> dict:
        return {"kind": "mcq_validation", "task_id": self.task_id,
                "question": self.question, "options": self.options,
                "generated_correct": self.generated_correct}


class AnnotationStore:
    """Tasks, annotators, and submissions with JSONL persistence."""

    def __init__(self, directory: str | Path,
                 annotator_cap: int = DEFAULT_ANNOTATOR_CAP,
                 screening_key: Optional[Sequence[str]] = None,
                 screening_threshold: int = DEFAULT_SCREENING_THRESHOLD):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)
        self.annotator_cap = annotator_cap
        self.screening_key = list(screening_key or [])
        self.screening_threshold = screening_threshold

        self._lock = threading.Lock()
        self._tasks: dict[str, RankingTask | McqValidationTask] = {}
        self._annotators: dict[str, dict] = {}      # id -> {token, screening}
        self._assignments: dict[str, list[str]] = {}  # task_id -> annotator ids
        # (task_id, annotator_id) -> live submission dict
        self._submissions: dict[tuple[str, str], dict] = {}
        self._replay()

    # -- persistence ------------------------------------------------------

    def _log_path(self, name: str) -> Path:
        return self.directory / f"{name}.jsonl"

    def _append(self, name: str, record: dict) -> None:
        import json

        with self._log_path(name).open("a", encoding="utf-8") as f:
            f.write(json.dumps(record, ensure_ascii=False, sort_keys=True) + "\n")
            f.flush()

    def _replay(self) -> None:
        tasks_log = self._log_path("tasks")
        if tasks_log.exists():
            for _, d in read_jsonl(tasks_log):
                task = self._task_from_dict(d)
                self._tasks[task.task_id] = task
        annotators_log = self._log_path("annotators")
        if annotators_log.exists():
            for _, d in read_jsonl(annotators_log):
                self._annotators[d["annotator_id"]] = d
        submissions_log = self._log_path("submissions")
        if submissions_log.exists():
            for _, d in read_jsonl(submissions_log):
                self._submissions[(d["task_id"], d["annotator_id"])] = d
        assignments_log = self._log_path("assignments")
        if assignments_log.exists():
            for _, d in read_jsonl(assignments_log):
                self._assignments.setdefault(d["task_id"], []).append(
                    d["annotator_id"])

    @staticmethod
    def _task_from_dict(d: dict) -> "RankingTask | McqValidationTask":
        if d["kind"] == "ranking":
            return RankingTask(task_id=d["task_id"], context=d["context"],
                               candidates=list(d["candidates"]),
                               source_map=dict(d["source_map"]),
                               shuffle_seed=d["shuffle_seed"])
        return McqValidationTask(task_id=d["task_id"], question=d["question"],
                                 options=dict(d["options"]),
                                 generated_correct=d["generated_correct"])

    # -- annotators and screening -----------------------------------------

    def register_annotator(self, annotator_id: str) -> str:
        with self._lock:
            if annotator_id in self._annotators:
                raise AnnotationError(f"annotator {annotator_id!r} already exists")
            token = uuid.uuid4().hex
            record = {"annotator_id": annotator_id, "token": token,
                      "screening": None}
            self._annotators[annotator_id] = record
            self._append("annotators", record)
            return token

    def authenticate(self, token: str) -> str:
        for annotator_id, record in self._annotators.items():
            if record["token"] == token:
                return annotator_id
        raise AuthError("unknown annotator token")

    def screening_gate(self, annotator_id: str, answers: Sequence[str],
                       key: Optional[Sequence[str]] = None,
                       threshold: Optional[int] = None) -> ScreeningRecord:
        """Score screening answers against the ground-truth key; passing
        gates all future submissions."""
        key = list(key if key is not None else self.screening_key)
        threshold = threshold if threshold is not None else self.screening_threshold
        if not key:
            raise AnnotationError("no screening key configured")
        if len(answers) != len(key):
            raise AnnotationError(
                f"screening expects {len(key)} answers, got {len(answers)}")
        with self._lock:
            if annotator_id not in self._annotators:
                raise AuthError(f"unknown annotator {annotator_id!r}")
            score = sum(1 for a, k in zip(answers, key) if a == k)
            record = ScreeningRecord(annotator_id=annotator_id,
                                     answers=list(answers), score=score,
                                     passed=score >= threshold)
            self._annotators[annotator_id]["screening"] = record.to_dict()
            self._append("screenings", record.to_dict())
            return record

    def _require_screened(self, annotator_id: str) -> None:
        record = self._annotators.get(annotator_id)
        if record is None:
            raise AuthError(f"unknown annotator {annotator_id!r}")
        screening = record.get("screening")
        if not screening or not screening.get("passed"):
            raise SubmissionError(
                f"annotator {annotator_id!r} has not passed screening")

    # -- task creation -----------------------------------------------------

    def create_ranking_task(self, context: str,
                            candidates: Sequence[tuple[str, str]],
                            seed: int,
                            task_id: Optional[str] = None) -> RankingTask:
        """Create a blinded ranking task from (system_id, text) candidates.

        Candidate order is shuffled with the recorded seed; display labels
        are assigned after shuffling, so the label sequence is the
        presentation order.
        """
        texts = [text for _, text in candidates]
        if len(set(texts)) != len(texts):
            raise AnnotationError("candidate texts must be distinct")
        if not candidates:
            raise AnnotationError("a ranking task needs candidates")
        order = list(range(len(candidates)))
        random.Random(seed).shuffle(order)
        shuffled = [candidates[i] for i in order]
        cards = [{"label": f"c{i}", "text": text}
                 for i, (_system, text) in enumerate(shuffled)]
        source_map = {f"c{i}": system for i, (system, _text) in enumerate(shuffled)}
        with self._lock:
            task_id = task_id or f"rank-{len(self._tasks):05d}"
            if task_id in self._tasks:
                raise AnnotationError(f"task {task_id!r} already exists")
            task = RankingTask(task_id=task_id, context=context,
                               candidates=cards, source_map=source_map,
                               shuffle_seed=seed)
            self._tasks[task_id] = task
            self._append("tasks", task.to_dict())
            return task

    def create_mcq_task(self, question: str, options: dict[str, str],
                        generated_correct: str,
                        task_id: Optional[str] = None) -> McqValidationTask:
        if sorted(options) != ["A", "B", "C", "D"]:
            raise AnnotationError("MCQ validation tasks need options A-D")
        with self._lock:
            task_id = task_id or f"mcq-{len(self._tasks):05d}"
            if task_id in self._tasks:
                raise AnnotationError(f"task {task_id!r} already exists")
            task = McqValidationTask(task_id=task_id, question=question,
                                     options=dict(options),
                                     generated_correct=generated_correct)
            self._tasks[task_id] = task
            self._append("tasks", task.to_dict())
            return task

    def get_task(self, task_id: str):
        task = self._tasks.get(task_id)
        if task is None:
            raise AnnotationError(f"unknown task {task_id!r}")
        return task

    # -- assignment --------------------------------------------------------

    def tasks_for(self, annotator_id: str, kind: Optional[str] = None,
                  limit: int = 50) -> list[dict]:
        """Tasks this annotator should work on, assigning new ones up to the
        per-task cap (fewest-assigned first, then task id)."""
        self._require_screened(annotator_id)
        with self._lock:
            mine = [
                t for t in self._tasks.values()
                if annotator_id in self._assignments.get(t.task_id, [])
            ]
            candidates = sorted(
                (t for t in self._tasks.values()
                 if annotator_id not in self._assignments.get(t.task_id, [])),
                key=lambda t: (len(self._assignments.get(t.task_id, [])),
                               t.task_id))
            for task in candidates:
                if len(mine) >= limit:
                    break
                assigned = self._assignments.setdefault(task.task_id, [])
                if len(assigned) >= self.annotator_cap:
                    continue
                assigned.append(annotator_id)
                self._append("assignments", {"task_id": task.task_id,
                                             "annotator_id": annotator_id})
                mine.append(task)
            payloads = []
            for task in sorted(mine, key=lambda t: t.task_id):
                if kind and task.annotator_payload()["kind"] != kind:
                    continue
                payloads.append(task.annotator_payload())
            return payloads[:limit]

    def assignment_count(self, task_id: str) -> int:
        return len(self._assignments.get(task_id, []))

    # -- submissions -------------------------------------------------------

    def submit_ranking(self, task_id: str, annotator_id: str,
                       permutation: Sequence[str]) -> dict:
        """Store a strict full ranking; replaces any prior submission by the
        same annotator, keeping the old one in the audit log."""
        self._require_screened(annotator_id)
        task = self.get_task(task_id)
        if not isinstance(task, RankingTask):
            raise SubmissionError(f"task {task_id!r} is not a ranking task")
        labels = task.labels()
        perm = list(permutation)
        if len(perm) != len(labels):
            raise SubmissionError(
                f"ranking must order all {len(labels)} candidates, got "
                f"{len(perm)} (ties and omissions are not allowed)")
        if len(set(perm)) != len(perm):
            dupes = sorted({x for x in perm if perm.count(x) > 1})
            raise SubmissionError(
                f"ranking repeats candidate labels {dupes} (ties are not "
                "allowed)")
        unknown = sorted(set(perm) - set(labels))
        if unknown:
            raise SubmissionError(f"ranking names unknown labels {unknown}")
        with self._lock:
            previous = self._submissions.get((task_id, annotator_id))
            record = {
                "kind": "ranking",
                "task_id": task_id,
                "annotator_id": annotator_id,
                "permutation": perm,
                "submitted_at": time.time(),
                "supersedes": previous["submitted_at"] if previous else None,
            }
            self._submissions[(task_id, annotator_id)] = record
            self._append("submissions", record)
            return {"status": "stored", "task_id": task_id,
                    "replaced_prior": previous is not None}

    def submit_mcq_validation(self, task_id: str, annotator_id: str,
                              plausible: bool, selection: str,
                              free_text: Optional[str] = None) -> dict:
        self._require_screened(annotator_id)
        task = self.get_task(task_id)
        if not isinstance(task, McqValidationTask):
            raise SubmissionError(f"task {task_id!r} is not an MCQ task")
        if selection not in MCQ_SELECTIONS:
            raise SubmissionError(
                f"selection must be one of {MCQ_SELECTIONS}, got {selection!r}")
        if selection == NONE_OF_THE_ABOVE and not free_text:
            logger.info("none-of-the-above without an alternative text")
        with self._lock:
            previous = self._submissions.get((task_id, annotator_id))
            record = {
                "kind": "mcq_validation",
                "task_id": task_id,
                "annotator_id": annotator_id,
                "plausible": bool(plausible),
                "selection": selection,
                "free_text": free_text,
                "submitted_at": time.time(),
                "supersedes": previous["submitted_at"] if previous else None,
            }
            self._submissions[(task_id, annotator_id)] = record
            self._append("submissions", record)
            return {"status": "stored", "task_id": task_id,
                    "replaced_prior": previous is not None}

    # -- exports -----------------------------------------------------------

    def export_rankings(self) -> dict:
        """Bundle of ranking tasks and live submissions, with provenance
        resolved so downstream statistics see system ids, not labels."""
        submissions = [s for s in self._submissions.values()
                       if s["kind"] == "ranking"]
        if not submissions:
            raise AnnotationError("no ranking submissions to export")
        by_task: dict[str, list[dict]] = {}
        for s in submissions:
            by_task.setdefault(s["task_id"], []).append(s)
        items = []
        for task_id in sorted(by_task):
            task = self.get_task(task_id)
            rankings = {}
            for s in sorted(by_task[task_id], key=lambda s: s["annotator_id"]):
                rankings[s["annotator_id"]] = [
                    task.source_map[label] for label in s["permutation"]]
            items.append({"task_id": task_id, "rankings": rankings})
        return {"kind": "rankings", "items": items,
                "submissions": len(submissions)}

    def export_mcq_validation(self) -> dict:
        """RatingsMatrix-ready export plus majority-vote accuracy of the
        generated correct answers."""
        submissions = [s for s in self._submissions.values()
                       if s["kind"] == "mcq_validation"]
        if not submissions:
            raise AnnotationError("no MCQ validation submissions to export")
        by_task: dict[str, dict[str, dict]] = {}
        raters: set[str] = set()
        for s in submissions:
            by_task.setdefault(s["task_id"], {})[s["annotator_id"]] = s
            raters.add(s["annotator_id"])
        items = sorted(by_task)
        rater_list = sorted(raters)
        cells = {}
        for task_id in items:
            for annotator_id, s in by_task[task_id].items():
                cells[(task_id, annotator_id)] = s["selection"]
        matrix = {
            "items": items,
            "raters": rater_list,
            "categories": list(MCQ_SELECTIONS),
            "cells": [
                {"item": item, "rater": rater, "value": value}
                for (item, rater), value in sorted(cells.items())
            ],
        }
        majority_matches = 0
        decided = 0
        for task_id in items:
            task = self.get_task(task_id)
            votes = [s["selection"] for s in by_task[task_id].values()]
            counts = {v: votes.count(v) for v in set(votes)}
            top = max(counts.values())
            winners = [v for v, c in counts.items() if c == top]
            if len(winners) != 1:
                continue
            decided += 1
            if winners[0] == task.generated_correct:
                majority_matches += 1
        accuracy = 100.0 * majority_matches / decided if decided else 0.0
        return {"kind": "mcq_validation", "matrix": matrix,
                "majority_vote_accuracy": accuracy,
                "decided_items": decided, "items": len(items)}


def ratings_matrix_from_export(export: dict) -> RatingsMatrix:
    """Rebuild a RatingsMatrix from an export_mcq_validation payload."""
    m = export["matrix"]
    cells = {(c["item"], c["rater"]): c["value"] for c in m["cells"]}
    return RatingsMatrix(items=list(m["items"]), raters=list(m["raters"]),
                         cells=cells, categories=tuple(m["categories"]))


def rankings_for_majority_vote(export: dict) -> list[list[list[str]]]:
    """Convert a rankings export into majority_vote_rankings input,
    keeping only items where every rater ranked the same candidate set."""
    items = []
    for item in export["items"]:
        rankings = [item["rankings"][r] for r in sorted(item["rankings"])]
        items.append(rankings)
    return items
