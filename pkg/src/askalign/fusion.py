"""Integration mechanics: pooled dataset export, weight averaging, configs.

Gradient training itself happens out of process. This module prepares what
a preference-optimization trainer consumes (pooled pair datasets, stage
configs) and fuses what it produces (weight archives), covering the data
mixing, reward fusion, and policy fusion strategies on the artifact side.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np

from .jsonl import dump_json, write_jsonl
from .judging import UnjudgedPairsError
from .synthesis import Attribute, PairSet, PairType
from .tensor_archive import TensorArchive, TensorArchiveError

logger = logging.getLogger(__name__)

ASK_INSTRUCTION = ("Given the conversation above, ask the patient one concise "
                   "follow-up question that would most help with their case.")

LAYOUTS = ("pairwise", "prompt-chosen-rejected")


class FusionError(Exception):
    pass


class EmptySelectionError(FusionError):
    pass


class FusionStrategy(str, Enum):
    DATA_MIXING = "data_mixing"
    REWARD_FUSION = "reward_fusion"
    POLICY_FUSION = "policy_fusion"


@dataclass(frozen=True)
class SelectionSpec:
    """Which slice of a pair set an export draws from."""

    attributes: frozenset[Attribute]
    pair_types: frozenset[PairType]
    filtered_only: bool = True

    def __post_init__(self):
        if not self.attributes:
            raise FusionError("selection needs at least one attribute")
        if not self.pair_types:
            raise FusionError("selection needs at least one pair type")

    @staticmethod
    def make(attributes: Iterable[Attribute | str],
             pair_types: Iterable[PairType | str] = tuple(PairType),
             filtered_only: bool = True) -> "SelectionSpec":
        return SelectionSpec(
            attributes=frozenset(Attribute(a) for a in attributes),
            pair_types=frozenset(PairType(p) for p in pair_types),
            filtered_only=filtered_only,
        )

    def describe(self) -> str:
        attrs = ",".join(sorted(a.value for a in self.attributes))
        types = ",".join(sorted(p.value for p in self.pair_types))
        return (f"attributes=[{attrs}] pair_types=[{types}] "
                f"filtered_only={self.filtered_only}")


@dataclass
class ExportResult:
    records: list[dict]
    counts: dict[str, dict[str, int]] = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.records)


def export_preference_dataset(pairset: PairSet, spec: SelectionSpec,
                              layout: str = "prompt-chosen-rejected",
                              path: Optional[str | Path] = None) -> ExportResult:
    """Export selected pairs as trainer-ready line-delimited records.

    Records are ordered by pair_id, so the same pair set and spec always
    produce a byte-identical file. The prompt is the pair's context plus a
    fixed question-asking instruction.
    """
    if layout not in LAYOUTS:
        raise FusionError(f"unknown layout {layout!r}; expected one of {LAYOUTS}")
    if spec.filtered_only:
        unjudged = sum(1 for p in pairset.pairs if p.kept is None)
        if unjudged:
            raise UnjudgedPairsError(unjudged)

    selected = [
        p for p in pairset.pairs
        if p.attribute in spec.attributes and p.pair_type in spec.pair_types
        and (not spec.filtered_only or p.kept)
    ]
    if not selected:
        raise EmptySelectionError(
            f"no pairs match the selection ({spec.describe()})")
    selected.sort(key=lambda p: p.pair_id)

    result = ExportResult(records=[])
    for p in selected:
        prompt = f"{p.context}\n\n{ASK_INSTRUCTION}"
        if layout == "prompt-chosen-rejected":
            record = {"prompt": prompt, "chosen": p.chosen, "rejected": p.rejected,
                      "attribute": p.attribute.value, "pair_type": p.pair_type.value}
        else:
            record = {"prompt": prompt, "response_a": p.chosen,
                      "response_b": p.rejected, "preferred": "a",
                      "attribute": p.attribute.value, "pair_type": p.pair_type.value}
        result.records.append(record)
        cell = result.counts.setdefault(p.attribute.value, {})
        cell[p.pair_type.value] = cell.get(p.pair_type.value, 0) + 1

    logger.info("exported %d records (%s)", len(result.records), spec.describe())
    if path is not None:
        write_jsonl(path, result.records)
    return result


def average_tensor_archives(archives: Sequence[TensorArchive],
                            weights: Optional[Sequence[float]] = None
                            ) -> TensorArchive:
    """Element-wise weighted mean over archives with identical layouts.

    Accumulation runs in float64 regardless of storage dtype, then the
    result is cast back to the common storage dtype. Weights are normalized
    internally; the default is an equal-weight average.
    """
    if not archives:
        raise TensorArchiveError("need at least one archive to average")
    if weights is None:
        norm_weights = [1.0 / len(archives)] * len(archives)
    else:
        if len(weights) != len(archives):
            raise TensorArchiveError(
                f"{len(weights)} weights for {len(archives)} archives")
        total = float(sum(weights))
        if total <= 0:
            raise TensorArchiveError("weights must sum to a positive value")
        norm_weights = [float(w) / total for w in weights]

    base_names = set(archives[0].entries)
    for i, archive in enumerate(archives[1:], start=1):
        names = set(archive.entries)
        if names != base_names:
            diff = sorted(names.symmetric_difference(base_names))
            raise TensorArchiveError(
                f"archive {i} tensor names differ from archive 0: {diff}")

    # Accumulate in a canonical order (content digest, then weight) so the
    # result is bit-identical under any permutation of the inputs.
    digests = [a.digest() for a in archives]
    order = sorted(range(len(archives)),
                   key=lambda i: (digests[i], norm_weights[i]))
    archives = [archives[i] for i in order]
    norm_weights = [norm_weights[i] for i in order]
    digests = [digests[i] for i in order]

    fused = TensorArchive()
    for name in sorted(base_names):
        ref = archives[0].entries[name]
        for i, archive in enumerate(archives[1:], start=1):
            arr = archive.entries[name]
            if arr.shape != ref.shape:
                raise TensorArchiveError(
                    f"tensor {name!r}: shape mismatch in archive {i} "
                    f"({arr.shape} vs {ref.shape})")
            if arr.dtype != ref.dtype:
                raise TensorArchiveError(
                    f"tensor {name!r}: dtype mismatch in archive {i} "
                    f"({arr.dtype} vs {ref.dtype})")
        if all(np.array_equal(a.entries[name], ref) for a in archives[1:]):
            # The mean of identical tensors is that tensor, exactly; skip
            # the accumulate-and-divide round-off.
            fused.entries[name] = ref.copy()
            continue
        acc = np.zeros(ref.shape, dtype=np.float64)
        for w, archive in zip(norm_weights, archives):
            acc += w * archive.entries[name].astype(np.float64)
        if np.issubdtype(ref.dtype, np.integer) or ref.dtype == np.bool_:
            fused.entries[name] = np.rint(acc).astype(ref.dtype)
        else:
            fused.entries[name] = acc.astype(ref.dtype)

    fused.metadata = {
        "sources": ",".join(d[:16] for d in digests),
        "weights": ",".join(f"{w:.12g}" for w in norm_weights),
    }
    return fused


# Trainer stage defaults. Shared: warmup 0.03, cosine-with-min-lr schedule,
# batch 256.
_COMMON = {
    "warmup_ratio": 0.03,
    "lr_schedule": "cosine_with_min_lr",
    "batch_size": 256,
}

TRAINER_DEFAULTS: dict[str, dict] = {
    "sft": {"epochs": 2, "learning_rate": 5e-6, **_COMMON},
    "dpo": {"epochs": 1, "learning_rate": 5e-7, "beta": 2.0, **_COMMON},
    "rm": {"epochs": 1, "learning_rate": 9e-6, "beta": 2.0, **_COMMON},
    "ppo": {"epochs": 1, "learning_rate": 5e-7, **_COMMON},
}


def emit_trainer_config(stage: str, overrides: Optional[dict] = None,
                        dataset_path: str = "", output_path: str = "",
                        path: Optional[str | Path] = None) -> dict:
    """Build a trainer config for one stage, applying overrides last."""
    if stage not in TRAINER_DEFAULTS:
        raise FusionError(
            f"unknown stage {stage!r}; expected one of {sorted(TRAINER_DEFAULTS)}")
    config = dict(TRAINER_DEFAULTS[stage])
    config["stage"] = stage
    config["dataset_path"] = dataset_path
    config["output_path"] = output_path
    if overrides:
        allowed = set(config)
        unknown = set(overrides) - allowed
        if unknown:
            raise FusionError(f"unknown override keys for stage {stage!r}: "
                              f"{sorted(unknown)}")
        config.update(overrides)
    if path is not None:
        dump_json(path, config)
    return config
