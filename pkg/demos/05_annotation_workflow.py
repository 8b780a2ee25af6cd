"""The expert annotation loop, end to end and in process.

Three simulated annotators pass the screening gate, rank blinded
seven-candidate tasks (ties are rejected), and validate an MCQ; the export
feeds directly into the majority-vote statistics. The same store serves
over HTTP via `askalign annotate-serve`; the browser client in frontend/
talks to those endpoints.
"""

import json
import random
import tempfile

from askalign.annotation.store import (AnnotationStore, SubmissionError,
                                       rankings_for_majority_vote)
from askalign.stats import majority_vote_rankings

SCREEN_KEY = ["B", "A", "D", "C"]
SYSTEMS = ["base", "dpo-data", "dpo-policy", "ppo-data", "ppo-reward",
           "ppo-policy", "human"]

rng = random.Random(11)

with tempfile.TemporaryDirectory() as tmp:
    store = AnnotationStore(tmp, screening_key=SCREEN_KEY)

    for name in ("ann0", "ann1", "ann2"):
        store.register_annotator(name)
        record = store.screening_gate(name, SCREEN_KEY)
        print(f"{name}: screening {record.score}/4 -> "
              f"{'passed' if record.passed else 'failed'}")

    tasks = []
    for i in range(5):
        candidates = [(s, f"Candidate follow-up {i}.{j}?")
                      for j, s in enumerate(SYSTEMS)]
        tasks.append(store.create_ranking_task(f"conversation {i}",
                                               candidates, seed=i))
    payload = tasks[0].annotator_payload()
    leaked = [s for s in SYSTEMS if s in json.dumps(payload)]
    print(f"\ncreated {len(tasks)} blinded ranking tasks "
          f"(system ids leaked into payload: {leaked or 'none'})")

    # A tie is rejected server-side before anything is stored.
    labels = tasks[0].labels()
    try:
        store.submit_ranking(tasks[0].task_id, "ann0",
                             [labels[0], labels[0]] + labels[2:])
    except SubmissionError as exc:
        print(f"tie submission rejected: {exc}")

    # Annotators mildly prefer later systems, with noise.
    for task in tasks:
        for name in ("ann0", "ann1", "ann2"):
            order = sorted(task.labels(),
                           key=lambda lbl: (SYSTEMS.index(task.source_map[lbl])
                                            + rng.uniform(-1.5, 1.5)),
                           reverse=True)
            store.submit_ranking(task.task_id, name, order)

    export = store.export_rankings()
    result = majority_vote_rankings(rankings_for_majority_vote(export),
                                    baseline="base")
    print(f"\nmajority-vote win-rates over {export['submissions']} "
          "submissions:")
    for cand, rate in sorted(result.baseline_winrates.items()):
        print(f"  {cand:<12} beats baseline on {rate:5.1f}% of tasks")

    mcq = store.create_mcq_task(
        "What is the most likely cause of the sore throat?",
        {"A": "Viral pharyngitis", "B": "Strep throat",
         "C": "Seasonal allergies", "D": "Acid reflux"},
        generated_correct="B")
    for name, sel in (("ann0", "B"), ("ann1", "B"), ("ann2", "A")):
        store.submit_mcq_validation(mcq.task_id, name, plausible=True,
                                    selection=sel)
    mcq_export = store.export_mcq_validation()
    print(f"\nMCQ validation: majority agrees with the generated answer on "
          f"{mcq_export['majority_vote_accuracy']:.1f}% of items")
