"""Synthesize attribute-directed preference pairs and filter them.

Walks the core data loop offline: decompose a forum thread into atomic
questions, rewrite each question in both directions along two attributes,
judge the variants under permuted presentation orders, and keep only the
pairs whose judged order matches the intended direction.
"""

import json

from askalign.corpus import ThreadRecord, Turn, decompose_thread
from askalign.fusion import SelectionSpec, emit_trainer_config, \
    export_preference_dataset
from askalign.gateway import MockBackend
from askalign.judging import judge_pairset, retention_report
from askalign.mocks import ranking_responder, tag_rank_key, variant_tagger
from askalign.synthesis import parse_attributes, synthesize_corpus

thread = ThreadRecord(
    thread_id="demo-thread",
    post_id="demo-post",
    title="Week-long sore throat",
    post_body="It hurts when I swallow and I have been very tired.",
    turns=(
        Turn("responder", "How long ago did it start? Any fever?", True),
        Turn("patient", "About a week. No fever. Thank you!", False),
    ),
)

# A scripted decomposition backend stands in for the parsing model.
decomposer = MockBackend(default=json.dumps({
    "questions": [
        {"turn_index": 0, "text": "How long ago did it start?"},
        {"turn_index": 0, "text": "Any fever?"},
    ],
    "conclusion": "Likely viral pharyngitis; see a doctor if it persists.",
    "positive_feedback": True,
    "final_diagnosis": None,
}))

parsed = decompose_thread(thread, decomposer.complete)
print(f"decomposed into {len(parsed.atomic_questions)} atomic questions; "
      f"conclusion: {parsed.conclusion!r}")

# The generator mock tags rewrites so the judge mock can rank them; a real
# run points both at live endpoints instead.
generator = MockBackend(default=variant_tagger)
attributes = parse_attributes(["clarity", "diagnostic_relevance"])
pairset = synthesize_corpus(list(parsed.atomic_questions), attributes,
                            generator.complete)
print(f"synthesized {len(pairset)} pairs "
      f"({len(parsed.atomic_questions)} questions x {len(attributes)} "
      "attributes x 3 pair types)")

judge = MockBackend(default=ranking_responder(tag_rank_key))
aux = {q.question_id: {"conclusion": parsed.conclusion or "",
                       "final_diagnosis": parsed.final_diagnosis or ""}
       for q in parsed.atomic_questions}
judge_pairset(pairset, judge.complete, aux_by_question=aux)

report = retention_report(pairset)
print()
print(report.to_text())

spec = SelectionSpec.make(attributes=attributes)
dataset = export_preference_dataset(pairset, spec)
print(f"\nexported {len(dataset)} trainer-ready records; first record keys: "
      f"{sorted(dataset.records[0])}")

config = emit_trainer_config("dpo", dataset_path="pairs.jsonl",
                             output_path="checkpoints/dpo")
print(f"dpo config: lr={config['learning_rate']}, beta={config['beta']}, "
      f"epochs={config['epochs']}, batch={config['batch_size']}")
