"""Stage-oriented pipeline orchestration.

One YAML config describes a run: endpoint definitions, a run directory,
and per-stage sections. Each invocation executes one stage, records a
provenance manifest (inputs, outputs, digests), and refuses to run on top
of upstream artifacts whose digests changed. Exit codes: 0 success,
1 stage failure, 2 config or provenance error.
"""

from __future__ import annotations

import argparse
import functools
import logging
import os
import sys
from dataclasses import dataclass
from pathlib import Path
from typing import Optional

import yaml

from . import corpus as corpus_mod
from . import fusion as fusion_mod
from . import judging as judging_mod
from . import manifest as manifest_mod
from . import mocks as mocks_mod
from . import reports as reports_mod
from . import simulator as sim_mod
from . import stats as stats_mod
from . import synthesis as synth_mod
from .gateway import Gateway, canonical_json, load_endpoints
from .jsonl import dump_json, load_json, read_jsonl, write_jsonl
from .manifest import RunManifest, digests_match, file_digest, run_lock

logger = logging.getLogger(__name__)

STAGES = ("ingest", "parse", "sample", "synthesize", "judge-filter", "export",
          "fuse-weights", "simulate", "winrate", "stats", "annotate-serve",
          "report")

EXIT_OK = 0
EXIT_STAGE_FAILURE = 1
EXIT_CONFIG_ERROR = 2


class ConfigError(Exception):
    pass


class StageFailure(Exception):
    pass


@dataclass
class StageContext:
    config: dict
    stage_cfg: dict
    base_dir: Path
    run_dir: Path
    dry_run: bool
    _gateway: Optional[Gateway] = None

    def path(self, value: str) -> Path:
        p = Path(value)
        return p if p.is_absolute() else (self.base_dir / p)

    def require(self, key: str):
        if key not in self.stage_cfg:
            raise ConfigError(f"stage config is missing {key!r}")
        return self.stage_cfg[key]

    @property
    def gateway(self) -> Gateway:
        if self._gateway is None:
            gw = Gateway(cache_dir=self.run_dir / "cache")
            specs = self.config.get("endpoints", {})
            load_endpoints(gw, specs,
                           mock_factory=lambda spec: mocks_mod.build_scripted_backend(spec))
            self._gateway = gw
        return self._gateway

    def llm(self, endpoint_name: str):
        # All pipeline calls go through the cache: reruns are free and
        # byte-identical.
        return functools.partial(self.gateway.cached_complete, endpoint_name)


def _load_config(path: Path) -> dict:
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        config = yaml.safe_load(path.read_text(encoding="utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"config does not parse: {exc}") from exc
    if not isinstance(config, dict) or "run_dir" not in config:
        raise ConfigError("config must be a mapping with a run_dir key")
    return config


def _walk_strings(value):
    if isinstance(value, str):
        yield value
    elif isinstance(value, dict):
        for v in value.values():
            yield from _walk_strings(v)
    elif isinstance(value, (list, tuple)):
        for v in value:
            yield from _walk_strings(v)


def _verify_upstream(ctx: StageContext) -> None:
    """Config paths that some earlier manifest produced must be unmodified.

    Every string leaf of the stage config is resolved; only those matching
    an artifact recorded by a succeeded stage are digest-checked, so plain
    option strings are ignored.
    """
    manifests_dir = ctx.run_dir / "manifests"
    if not manifests_dir.exists():
        return
    recorded: dict[str, str] = {}
    for mpath in manifests_dir.glob("*.json"):
        m = RunManifest.from_dict(load_json(mpath))
        if m.status != "succeeded":
            continue
        for out in m.outputs:
            recorded[out["path"]] = out["digest"]
    for leaf in _walk_strings(ctx.stage_cfg):
        path = ctx.path(leaf)
        key = str(path)
        if key in recorded and path.exists():
            if file_digest(path) != recorded[key]:
                raise ConfigError(
                    f"digest mismatch: {path} differs from the artifact "
                    "recorded by its producing stage; rerun that stage or "
                    "restore the file")


# ---------------------------------------------------------------------------
# Stage implementations: return (input_paths, output_paths, info, endpoints)
# ---------------------------------------------------------------------------

def stage_ingest(ctx: StageContext):
    input_path = ctx.path(ctx.require("input"))
    output_path = ctx.path(ctx.require("output"))
    if ctx.dry_run:
        return _plan(ctx, inputs=[input_path], llm_calls=0)
    corpus = corpus_mod.ingest_threads(input_path)
    write_jsonl(output_path, (t.to_dict() for t in corpus.threads))
    info = {"threads": len(corpus), "unique_posts": corpus.unique_posts(),
            "ineligible": len(corpus.ineligible)}
    print(f"ingested {info['threads']} threads "
          f"({info['unique_posts']} unique posts, "
          f"{info['ineligible']} ineligible)")
    return [input_path], [output_path], info, []


def stage_parse(ctx: StageContext):
    input_path = ctx.path(ctx.require("input"))
    output_path = ctx.path(ctx.require("output"))
    endpoint = ctx.require("endpoint")
    threads = [corpus_mod.ThreadRecord.from_dict(d)
               for _, d in read_jsonl(input_path)]
    if ctx.dry_run:
        return _plan(ctx, inputs=[input_path], llm_calls=len(threads))
    llm = ctx.llm(endpoint)
    parsed, failures = [], []
    for thread in threads:
        try:
            parsed.append(corpus_mod.decompose_thread(thread, llm))
        except corpus_mod.CorpusError as exc:
            failures.append({"thread_id": thread.thread_id, "error": str(exc)})
    write_jsonl(output_path, (p.to_dict() for p in parsed))
    info = {"parsed": len(parsed), "failures": len(failures),
            "questions": sum(len(p.atomic_questions) for p in parsed)}
    print(f"parsed {info['parsed']} threads into {info['questions']} "
          f"questions ({info['failures']} failures)")
    return [input_path], [output_path], info, [endpoint]


def _load_parsed(path: Path) -> list:
    return [corpus_mod.ParsedThread.from_dict(d) for _, d in read_jsonl(path)]


def stage_sample(ctx: StageContext):
    input_path = ctx.path(ctx.require("input"))
    output_path = ctx.path(ctx.require("output"))
    sizes = tuple(ctx.require("sizes"))
    seed = int(ctx.stage_cfg.get("seed", 0))
    if len(sizes) != 3:
        raise ConfigError("sizes must be [train, dev, test]")
    if ctx.dry_run:
        return _plan(ctx, inputs=[input_path], llm_calls=0)
    labeled = corpus_mod.label_questions(_load_parsed(input_path))
    split = corpus_mod.stratified_split(labeled, sizes, seed)
    split.save(output_path)
    info = {"train": len(split.train), "dev": len(split.dev),
            "test": len(split.test), "seed": seed}
    print(f"split {sum(sizes)} questions into "
          f"{info['train']}/{info['dev']}/{info['test']} (seed {seed})")
    return [input_path], [output_path], info, []


def _questions_for_subset(parsed_path: Path, split_path: Optional[Path],
                          subset: str) -> list:
    parsed = _load_parsed(parsed_path)
    questions = [q for p in parsed for q in p.atomic_questions]
    if split_path is None:
        return questions
    split = corpus_mod.SplitAssignment.load(split_path)
    wanted = set(getattr(split, subset))
    return [q for q in questions if q.question_id in wanted]


def stage_synthesize(ctx: StageContext):
    parsed_path = ctx.path(ctx.require("questions"))
    output_path = ctx.path(ctx.require("output"))
    endpoint = ctx.require("endpoint")
    split_path = ctx.path(ctx.stage_cfg["split"]) if "split" in ctx.stage_cfg else None
    subset = ctx.stage_cfg.get("subset", "train")
    attrs = synth_mod.parse_attributes(ctx.stage_cfg.get("attributes", ["all"]))
    questions = _questions_for_subset(parsed_path, split_path, subset)
    if ctx.dry_run:
        inputs = [parsed_path] + ([split_path] if split_path else [])
        return _plan(ctx, inputs=inputs,
                     llm_calls=len(questions) * len(attrs) * 2)
    pairset = synth_mod.synthesize_corpus(questions, attrs, ctx.llm(endpoint))
    pairset.save(output_path)
    manifest_path = output_path.with_suffix(".manifest.json")
    dump_json(manifest_path, pairset.manifest())
    inputs = [parsed_path] + ([split_path] if split_path else [])
    info = pairset.manifest()
    print(f"synthesized {len(pairset)} pairs over {len(questions)} questions "
          f"x {len(attrs)} attributes ({info['failures']} failures)")
    return inputs, [output_path, manifest_path], info, [endpoint]


def stage_judge_filter(ctx: StageContext):
    pairs_path = ctx.path(ctx.require("pairs"))
    output_path = ctx.path(ctx.require("output"))
    report_path = ctx.path(ctx.stage_cfg.get("report", "retention.json"))
    endpoint = ctx.require("endpoint")
    pairset = synth_mod.PairSet.load(pairs_path)
    groups = {(p.question_id, p.attribute.value) for p in pairset.pairs}
    if ctx.dry_run:
        return _plan(ctx, inputs=[pairs_path], llm_calls=len(groups) * 2)
    aux = {}
    if "parsed" in ctx.stage_cfg:
        for parsed in _load_parsed(ctx.path(ctx.stage_cfg["parsed"])):
            for q in parsed.atomic_questions:
                aux[q.question_id] = {
                    "conclusion": parsed.conclusion or "",
                    "final_diagnosis": parsed.final_diagnosis or "",
                }
    failures = judging_mod.judge_pairset(pairset, ctx.llm(endpoint),
                                         aux_by_question=aux)
    pairset.save(output_path)
    report = judging_mod.retention_report(pairset)
    dump_json(report_path, report.to_dict())
    print(report.to_text())
    info = {"pairs": len(pairset), "judge_failures": len(failures),
            "global_kept_fraction": report.global_kept_fraction}
    return [pairs_path], [output_path, report_path], info, [endpoint]


def stage_export(ctx: StageContext):
    pairs_path = ctx.path(ctx.require("pairs"))
    output_path = ctx.path(ctx.require("output"))
    if ctx.dry_run:
        return _plan(ctx, inputs=[pairs_path], llm_calls=0)
    pairset = synth_mod.PairSet.load(pairs_path)
    spec = fusion_mod.SelectionSpec.make(
        attributes=synth_mod.parse_attributes(
            ctx.stage_cfg.get("attributes", ["all"])),
        pair_types=ctx.stage_cfg.get("pair_types", ["EO", "EC", "OC"]),
        filtered_only=bool(ctx.stage_cfg.get("filtered_only", True)))
    layout = ctx.stage_cfg.get("layout", "prompt-chosen-rejected")
    result = fusion_mod.export_preference_dataset(pairset, spec,
                                                  layout=layout,
                                                  path=output_path)
    outputs = [output_path]
    info = {"records": len(result), "counts": result.counts,
            "selection": spec.describe()}
    trainer_cfg = ctx.stage_cfg.get("trainer_config")
    if trainer_cfg:
        config_path = ctx.path(trainer_cfg.get("output", "trainer_config.json"))
        fusion_mod.emit_trainer_config(
            stage=trainer_cfg.get("stage", "dpo"),
            overrides=trainer_cfg.get("overrides"),
            dataset_path=str(output_path),
            output_path=trainer_cfg.get("model_output", "checkpoints/"),
            path=config_path)
        outputs.append(config_path)
    print(f"exported {len(result)} records ({spec.describe()})")
    return [pairs_path], outputs, info, []


def stage_fuse_weights(ctx: StageContext):
    archive_paths = [ctx.path(p) for p in ctx.require("archives")]
    output_path = ctx.path(ctx.require("output"))
    if ctx.dry_run:
        return _plan(ctx, inputs=archive_paths, llm_calls=0)
    from .tensor_archive import TensorArchive

    archives = [TensorArchive.load(p) for p in archive_paths]
    fused = fusion_mod.average_tensor_archives(
        archives, weights=ctx.stage_cfg.get("weights"))
    fused.save(output_path)
    info = {"archives": len(archives), "tensors": len(fused)}
    print(f"fused {len(archives)} archives ({len(fused)} tensors) "
          f"-> {output_path}")
    return archive_paths, [output_path], info, []


def _agents(ctx: StageContext) -> sim_mod.AgentEndpoints:
    endpoints = ctx.require("endpoints")
    for role in ("question", "decision", "abstention", "patient"):
        if role not in endpoints:
            raise ConfigError(f"simulate endpoints must include {role!r}")
    return sim_mod.AgentEndpoints(
        question=ctx.llm(endpoints["question"]),
        decision=ctx.llm(endpoints["decision"]),
        abstention=ctx.llm(endpoints["abstention"]),
        patient=ctx.llm(endpoints["patient"]),
    )


def stage_simulate(ctx: StageContext):
    scenarios_path = ctx.path(ctx.require("scenarios"))
    episodes_path = ctx.path(ctx.stage_cfg.get("output", "episodes.jsonl"))
    summary_path = ctx.path(ctx.stage_cfg.get("summary", "benchmark.json"))
    params = sim_mod.EpisodeParams(
        max_turns=int(ctx.stage_cfg.get("max_turns", sim_mod.DEFAULT_MAX_TURNS)),
        confidence_threshold=int(ctx.stage_cfg.get(
            "threshold", sim_mod.DEFAULT_CONFIDENCE_THRESHOLD)))
    inputs = [scenarios_path]
    build_cfg = ctx.stage_cfg.get("build")
    if build_cfg and not scenarios_path.exists():
        threads_path = ctx.path(build_cfg["threads"])
        parsed_path = ctx.path(build_cfg["parsed"])
        inputs = [threads_path, parsed_path]
        if not ctx.dry_run:
            threads = {t.thread_id: t for t in
                       (corpus_mod.ThreadRecord.from_dict(d)
                        for _, d in read_jsonl(threads_path))}
            parsed = _load_parsed(parsed_path)
            pairs = [(threads[p.thread_id], p) for p in parsed
                     if p.thread_id in threads]
            scenarios = sim_mod.build_mcq_tasks(
                pairs, ctx.llm(build_cfg.get("endpoint", "builder")),
                seed=int(build_cfg.get("seed", 0)))
            sim_mod.save_scenarios(scenarios_path, scenarios)
    if ctx.dry_run:
        n = 0
        if scenarios_path.exists():
            n = len(sim_mod.load_scenarios(scenarios_path))
        upper = n * (params.max_turns * 3 + 2)
        return _plan(ctx, inputs=inputs, llm_calls=upper, upper_bound=True)
    scenarios = sim_mod.load_scenarios(scenarios_path)
    result = sim_mod.run_benchmark(scenarios, _agents(ctx), params,
                                   results_path=episodes_path, resume=True)
    dump_json(summary_path, result.to_dict())
    info = result.to_dict()
    print(f"benchmark accuracy: {result.accuracy:.2f}% over "
          f"{len(result.results)} episodes ({len(result.failures)} failures)")
    outputs = [episodes_path, summary_path]
    if build_cfg and scenarios_path.exists():
        outputs.append(scenarios_path)
    endpoint_names = sorted(set(ctx.require("endpoints").values()))
    return inputs, outputs, info, endpoint_names


def stage_winrate(ctx: StageContext):
    contexts_path = ctx.path(ctx.require("contexts"))
    output_path = ctx.path(ctx.stage_cfg.get("output", "winrate.json"))
    records = [d for _, d in read_jsonl(contexts_path)]
    if ctx.dry_run:
        return _plan(ctx, inputs=[contexts_path], llm_calls=len(records) * 4)
    contexts = [r["context"] for r in records]
    aux = {r["context"]: {"final_diagnosis": r.get("final_diagnosis", ""),
                          "conclusion": r.get("conclusion", "")}
           for r in records}

    def generator(endpoint_name: str):
        llm = ctx.llm(endpoint_name)

        def generate(context: str) -> str:
            from .prompts import render_prompt
            from .gateway import GenParams

            req = GenParams(temperature=0.6).request(user=render_prompt(
                "ask_question",
                {"initial_info": context, "qa_history": "(none yet)"}))
            return llm(req).text.strip()

        return generate

    result = stats_mod.winrate(
        contexts,
        candidate=generator(ctx.require("candidate")),
        baseline=generator(ctx.require("baseline")),
        judge=ctx.llm(ctx.require("judge")),
        dimension=ctx.stage_cfg.get("dimension", "overall"),
        aux_by_context=aux)
    dump_json(output_path, result.to_dict())
    print(f"win-rate: {result.rate:.2f}% over {result.comparisons} contexts "
          f"({len(result.failures)} failures)")
    endpoint_names = [ctx.require("candidate"), ctx.require("baseline"),
                      ctx.require("judge")]
    return [contexts_path], [output_path], result.to_dict(), endpoint_names


def stage_stats(ctx: StageContext):
    output_path = ctx.path(ctx.stage_cfg.get("output", "stats.json"))
    inputs: list[Path] = []
    out: dict = {}
    if "matrix" in ctx.stage_cfg:
        matrix_path = ctx.path(ctx.stage_cfg["matrix"])
        inputs.append(matrix_path)
        if not ctx.dry_run:
            matrix = stats_mod.RatingsMatrix.load(matrix_path)
            ac1 = stats_mod.gwet_ac1(matrix)
            out["ac1"] = ac1.to_dict()
            print(reports_mod.agreement_table([("ratings", ac1)]))
            try:
                out["fleiss_kappa"] = stats_mod.fleiss_kappa(matrix).kappa
            except stats_mod.StatsError as exc:
                out["fleiss_kappa_error"] = str(exc)
    if "rankings" in ctx.stage_cfg:
        rankings_path = ctx.path(ctx.stage_cfg["rankings"])
        inputs.append(rankings_path)
        if not ctx.dry_run:
            from .annotation.store import rankings_for_majority_vote

            bundle = load_json(rankings_path)
            rankings = rankings_for_majority_vote(bundle)
            result = stats_mod.majority_vote_rankings(
                rankings, baseline=ctx.stage_cfg.get("baseline"))
            out["majority_vote"] = {"matrix": result.matrix,
                                    "baseline_winrates": result.baseline_winrates}
    if not inputs:
        raise ConfigError("stats stage needs a matrix and/or rankings input")
    if ctx.dry_run:
        return _plan(ctx, inputs=inputs, llm_calls=0)
    dump_json(output_path, out)
    return inputs, [output_path], {k: True for k in out}, []


def stage_annotate_serve(ctx: StageContext):
    from .annotation.service import create_app
    from .annotation.store import AnnotationStore

    store_dir = ctx.path(ctx.stage_cfg.get("store_dir", "annotation-store"))
    admin_token = ctx.stage_cfg.get("admin_token")
    if not admin_token:
        env_name = ctx.stage_cfg.get("admin_token_env", "ANNOTATION_ADMIN_TOKEN")
        admin_token = os.environ.get(env_name)
    if not admin_token:
        raise ConfigError("annotate-serve needs admin_token or an "
                          "admin_token_env variable that is set")
    store = AnnotationStore(
        store_dir,
        annotator_cap=int(ctx.stage_cfg.get("annotator_cap", 3)),
        screening_key=ctx.stage_cfg.get("screening_key"),
        screening_threshold=int(ctx.stage_cfg.get("screening_threshold", 3)))
    app = create_app(store, admin_token)
    if ctx.dry_run:
        return _plan(ctx, inputs=[], llm_calls=0)
    import uvicorn

    uvicorn.run(app, host=ctx.stage_cfg.get("host", "127.0.0.1"),
                port=int(ctx.stage_cfg.get("port", 8008)))
    return [], [], {}, []


def stage_report(ctx: StageContext):
    output_path = ctx.path(ctx.stage_cfg.get("output", "report.txt"))
    sections: list[str] = []
    inputs: list[Path] = []

    model_entries = ctx.stage_cfg.get("models", [])
    for entry in model_entries:
        for key in ("winrate", "summary"):
            if key in entry:
                inputs.append(ctx.path(entry[key]))
    if "retention" in ctx.stage_cfg:
        inputs.append(ctx.path(ctx.stage_cfg["retention"]))
    if not inputs:
        raise ConfigError("report stage has nothing to report")
    missing = [str(p) for p in inputs if not p.exists()]
    if missing:
        raise ConfigError(f"report references missing artifacts: {missing}")
    if ctx.dry_run:
        return _plan(ctx, inputs=inputs, llm_calls=0)

    rows = []
    for entry in model_entries:
        row = {"model": entry["model"], "winrate": None, "accuracy": None}
        if "winrate" in entry:
            row["winrate"] = load_json(ctx.path(entry["winrate"]))["rate"]
        if "summary" in entry:
            row["accuracy"] = load_json(ctx.path(entry["summary"]))["accuracy"]
        rows.append(row)
    if rows:
        sections.append(reports_mod.winrate_accuracy_table(rows))
    if "retention" in ctx.stage_cfg:
        sections.append(reports_mod.render_retention(
            load_json(ctx.path(ctx.stage_cfg["retention"]))))
    sections.append(reports_mod.REPRODUCIBILITY_NOTE)
    text = "\n\n".join(sections) + "\n"
    output_path.parent.mkdir(parents=True, exist_ok=True)
    output_path.write_text(text, encoding="utf-8")
    print(text)
    return inputs, [output_path], {"sections": len(sections)}, []


def _plan(ctx: StageContext, inputs: list[Path], llm_calls: int,
          upper_bound: bool = False):
    qualifier = "at most " if upper_bound else ""
    print(f"dry run: would read {len(inputs)} inputs and issue "
          f"{qualifier}{llm_calls} LLM calls")
    return None


STAGE_FNS = {
    "ingest": stage_ingest,
    "parse": stage_parse,
    "sample": stage_sample,
    "synthesize": stage_synthesize,
    "judge-filter": stage_judge_filter,
    "export": stage_export,
    "fuse-weights": stage_fuse_weights,
    "simulate": stage_simulate,
    "winrate": stage_winrate,
    "stats": stage_stats,
    "annotate-serve": stage_annotate_serve,
    "report": stage_report,
}


def run_stage(stage: str, config_path: Path, dry_run: bool = False,
              force: bool = False) -> int:
    try:
        config = _load_config(config_path)
        base_dir = config_path.parent.resolve()
        run_dir_cfg = Path(config["run_dir"])
        run_dir = run_dir_cfg if run_dir_cfg.is_absolute() else base_dir / run_dir_cfg
        stages_cfg = config.get("stages", {})
        key = stage.replace("-", "_")
        if key not in stages_cfg:
            raise ConfigError(f"config has no section for stage {key!r}")
        ctx = StageContext(config=config, stage_cfg=stages_cfg[key],
                           base_dir=base_dir, run_dir=run_dir,
                           dry_run=dry_run)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR

    if dry_run:
        try:
            STAGE_FNS[stage](ctx)
            return EXIT_OK
        except ConfigError as exc:
            print(f"config error: {exc}", file=sys.stderr)
            return EXIT_CONFIG_ERROR

    config_digest = None
    try:
        with run_lock(run_dir, force=force):
            stage_key = stage.replace("-", "_")
            config_digest = canonical_json(ctx.stage_cfg)
            existing = RunManifest.load(run_dir, stage_key)
            if (existing is not None and existing.status == "succeeded"
                    and existing.info.get("config") == config_digest
                    and digests_match(existing.inputs)
                    and digests_match(existing.outputs)):
                print(f"stage {stage} is up to date (run {existing.run_id})")
                return EXIT_OK

            _verify_upstream(ctx)
            result = STAGE_FNS[stage](ctx)
            if result is None:
                return EXIT_OK
            inputs, outputs, info, endpoints = result
            manifest = RunManifest.start(stage_key,
                                         [p for p in inputs if p.exists()],
                                         endpoints)
            manifest.info["config"] = config_digest
            manifest.finish(outputs, info)
            manifest.save(run_dir)
            return EXIT_OK
    except manifest_mod.RunLockedError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG_ERROR
    except Exception as exc:  # noqa: BLE001 - stage boundary
        logger.exception("stage %s failed", stage)
        print(f"stage {stage} failed: {exc}", file=sys.stderr)
        try:
            failed = RunManifest.start(stage.replace("-", "_"), [], [])
            if config_digest:
                failed.info["config"] = config_digest
            failed.fail(str(exc))
            failed.save(run_dir)
        except Exception:  # noqa: BLE001 - best-effort failure record
            pass
        return EXIT_STAGE_FAILURE


def main(argv: Optional[list[str]] = None) -> int:
    parser = argparse.ArgumentParser(
        prog="askalign",
        description="Stage-oriented pipeline for question-quality alignment "
                    "data, evaluation, and annotation.")
    sub = parser.add_subparsers(dest="stage", required=True)
    for stage in STAGES:
        sp = sub.add_parser(stage, help=f"run the {stage} stage")
        sp.add_argument("--config", required=True, type=Path,
                        help="run config file (YAML)")
        sp.add_argument("--dry-run", action="store_true",
                        help="print planned work and LLM call counts only")
        sp.add_argument("--force", action="store_true",
                        help="override a stale run-directory lock")
    args = parser.parse_args(argv)
    logging.basicConfig(level=os.environ.get("ASKALIGN_LOGLEVEL", "WARNING"))
    return run_stage(args.stage, args.config, dry_run=args.dry_run,
                     force=args.force)


if __name__ == "__main__":
    sys.exit(main())
