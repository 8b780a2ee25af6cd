"""Run interactive diagnostic episodes against a record-grounded patient.

Three expert profiles face the same scenarios: one that never feels
confident (forced to answer at the 15-turn cap), one that answers
immediately, and a faithful pipeline that asks the one question whose
answer names the diagnosis. Benchmark accuracy quantifies the difference
question quality makes.
"""

import re

from askalign.gateway import MockBackend
from askalign.mocks import confidence_responder, grounded_patient
from askalign.simulator import AgentEndpoints, ScenarioMCQ, run_benchmark

DIAGNOSES = ["Strep throat", "Kidney stones", "Migraine", "Anemia"]


def scenario(i: int) -> ScenarioMCQ:
    correct_text = DIAGNOSES[i % len(DIAGNOSES)]
    labels = ["A", "B", "C", "D"]
    correct_label = labels[i % 4]
    distractors = iter(d for d in DIAGNOSES if d != correct_text)
    options = {lbl: correct_text if lbl == correct_label else next(distractors)
               for lbl in labels}
    return ScenarioMCQ(
        scenario_id=f"case-{i}",
        initial_info=f"Patient {i} with an undiagnosed complaint.",
        hidden_record=(f"Case {i} history\nSymptoms discussed at length.\n"
                       f"Patient: The specialist confirmed "
                       f"{correct_text.lower()}."),
        inquiry="What is the most likely diagnosis?",
        options=options,
        correct=correct_label,
    )


def faithful_decision(req):
    """Choose the option whose text showed up in the gathered answers."""
    text = "\n".join(m.content for m in req.messages)
    qa = text.split("***QUESTIONS ASKED SO FAR***")[1] \
        .split("***INQUIRY***")[0].lower()
    for label, option in re.findall(r"^([A-D])\. (.+)$", text, re.MULTILINE):
        if option.lower() in qa:
            return label
    return "A"


def expert(abstention_backend, decision_backend) -> AgentEndpoints:
    return AgentEndpoints(
        question=MockBackend(default="What did the specialist confirm?").complete,
        decision=decision_backend.complete,
        abstention=abstention_backend.complete,
        patient=MockBackend(default=grounded_patient).complete,
    )


scenarios = [scenario(i) for i in range(8)]

profiles = {
    "never confident (hits the 15-turn cap)":
        expert(MockBackend(default=confidence_responder(1)),
               MockBackend(default="A")),
    "always confident (asks nothing)":
        expert(MockBackend(default=confidence_responder(5)),
               MockBackend(default="A")),
}

# The faithful profile asks once, reads the answer, then decides.
asks_once = MockBackend(default=confidence_responder(5))
asks_once.script(r"\(none yet\)", "Rationale: nothing known yet.\nConfidence: 2")
profiles["faithful single-question pipeline"] = expert(
    asks_once, MockBackend(default=faithful_decision))

for name, agents in profiles.items():
    result = run_benchmark(scenarios, agents)
    turns = [r.turns_used for r in result.results]
    print(f"{name:<42} accuracy {result.accuracy:6.2f}%  "
          f"turns used {min(turns)}-{max(turns)}")

print("\ntranscript of one faithful episode:")
one = run_benchmark(scenarios[:1],
                    profiles["faithful single-question pipeline"]).results[0]
for event in one.transcript:
    print(f"  {event}")
