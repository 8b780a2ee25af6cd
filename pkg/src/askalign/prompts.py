"""Prompt templates and rendering.

Placeholders are ``{lowercase_identifier}`` tokens. Rendering is strict:
an unbound placeholder raises instead of silently emitting an empty string,
because a prompt with a hole produces garbage generations that are expensive
to trace back.
"""

from __future__ import annotations

import re

PLACEHOLDER_RE = re.compile(r"\{([a-z_][a-z0-9_]*)\}")


class PromptError(Exception):
    pass


class UnknownTemplateError(PromptError):
    def __init__(self, template_id: str):
        super().__init__(f"unknown template: {template_id!r}")
        self.template_id = template_id


class MissingVariableError(PromptError):
    def __init__(self, template_id: str, missing: list[str]):
        super().__init__(
            f"template {template_id!r} is missing variables: {', '.join(missing)}")
        self.template_id = template_id
        self.missing = missing


# ---------------------------------------------------------------------------
# Question-quality attributes: definitions, scale anchors, rewrite phrasing.
# ---------------------------------------------------------------------------

ATTRIBUTE_DEFINITIONS = {
    "clarity": (
        "The ease with which a reader can understand the intent and meaning "
        "of the question. A clear question avoids ambiguity and vagueness, "
        "providing enough detail to prevent misunderstanding, while avoiding "
        "excessive complexity or overloading with jargon."
    ),
    "focus": (
        "How directly the question targets a specific information gap. A "
        "focused question asks about one concrete thing and invites an "
        "informative reply, rather than sweeping generally over many topics."
    ),
    "answerability": (
        "Whether the respondent can actually answer the question from their "
        "own knowledge and experience. An answerable question asks about "
        "symptoms, history, and circumstances the patient knows firsthand, "
        "not for medical judgments that belong to the clinician."
    ),
    "medical_accuracy": (
        "The degree to which the question is consistent with established "
        "medical textbook knowledge and clinical guidelines. An accurate "
        "question contains no incorrect premises, wrong terminology, or "
        "implied claims that contradict accepted medicine."
    ),
    "diagnostic_relevance": (
        "How much the question probes symptoms, risk factors, or contextual "
        "details that matter for refining the differential diagnosis. A "
        "relevant question targets information that can rule candidate "
        "conditions in or out."
    ),
    "avoid_ddx_bias": (
        "The extent to which the question avoids suggestive or leading "
        "wording that could introduce cognitive bias into diagnostic "
        "reasoning. An unbiased question gathers information without nudging "
        "the patient or the clinician toward a pre-selected diagnosis."
    ),
    "coarse": (
        "The overall quality of the question as a clinical follow-up: how "
        "well it helps the clinician gather useful information from the "
        "patient, all properties considered together."
    ),
    "overall": (
        "The overall quality of the question as a clinical follow-up: how "
        "well it helps the clinician gather useful information from the "
        "patient, all properties considered together."
    ),
}

ATTRIBUTE_SCALE_ANCHORS = {
    "clarity": """Very ambiguous: The question is highly ambiguous, vague, or disorganized, making it very difficult to understand what the asker is seeking. The question may lead to multiple interpretations and confusion.
Somewhat ambiguous: The question is somewhat ambiguous or vague and may include overly complex phrasing. It requires significant effort to interpret.
In-between: The question is mostly understandable but could benefit from rewording or simplification to remove partial ambiguity or excessive jargon.
Somewhat clear: The question is generally clear, with minimal ambiguity, and can be understood by a layperson. There is little chance of misunderstanding.
Very clear: The question is entirely unambiguous, easy to understand, and structured in a logical, concise manner. No jargon or unnecessary complexity.""",
    "focus": """Very unfocused: The question sprawls across many topics or asks about everything at once; a reply could go in any direction.
Somewhat unfocused: The question mixes several loosely related asks, diluting the information it will elicit.
In-between: The question has an identifiable target but carries extra scope that blurs it.
Somewhat focused: The question mostly targets one information gap, with minor digressions.
Very focused: The question targets exactly one concrete information gap and will elicit a directly informative reply.""",
    "answerability": """Very hard to answer: The question asks for medical expertise, test interpretation, or knowledge the patient cannot have.
Somewhat hard to answer: The question partly depends on clinical knowledge or facts the patient is unlikely to know.
In-between: The patient could answer, but only with guesswork or unusual recall.
Somewhat answerable: The question is mostly about the patient's own experience, with small parts they may not know.
Very answerable: The question is entirely within the patient's firsthand experience and memory.""",
    "medical_accuracy": """Very inaccurate: The question rests on premises that contradict established medical knowledge or misuses clinical concepts.
Somewhat inaccurate: The question contains noticeable medical errors or dubious assumptions.
In-between: The question is plausible but imprecise in its medical content.
Somewhat accurate: The question is consistent with standard medical knowledge, with minor looseness.
Very accurate: The question is fully aligned with established medical textbook knowledge and guidelines.""",
    "diagnostic_relevance": """Very irrelevant: The question has no bearing on the diagnostic picture.
Somewhat irrelevant: The question touches the case only tangentially and would barely change the differential.
In-between: The question is loosely related to the differential but not what a clinician would prioritize.
Somewhat relevant: The question probes useful symptoms, risk factors, or context for the differential.
Very relevant: The question targets exactly the information that would most refine or discriminate the differential diagnosis.""",
    "avoid_ddx_bias": """Very biased: The question strongly suggests a particular diagnosis or answer, steering the patient and the reasoning.
Somewhat biased: The question contains leading wording or embedded assumptions that favor one hypothesis.
In-between: The question is mostly neutral but hints at an expected answer.
Somewhat unbiased: The question is neutral in substance with only faint leading cues.
Very unbiased: The question is fully neutral, gathering information without suggesting any diagnosis or expected answer.""",
    "coarse": """Very poor: The question is unhelpful for the clinical conversation and unlikely to yield useful information.
Somewhat poor: The question has clear weaknesses that limit what it will elicit.
In-between: The question is serviceable but unremarkable.
Somewhat good: The question is useful and well formed, with minor weaknesses.
Very good: The question is exactly what a skilled clinician would ask at this point in the conversation.""",
}

# (attribute, direction) -> how the rewrite instruction describes the change.
DIRECTION_PHRASES = {
    ("clarity", "enhanced"): "clearer/less ambiguous for the patient",
    ("clarity", "corrupted"): "less clear/more ambiguous for the patient",
    ("focus", "enhanced"): "more focused on a single specific information gap",
    ("focus", "corrupted"): "less focused/more scattered across topics",
    ("answerability", "enhanced"):
        "easier for the patient to answer from their own knowledge and experience",
    ("answerability", "corrupted"):
        "harder for the patient to answer/outside what a patient can reasonably know",
    ("medical_accuracy", "enhanced"):
        "more aligned with established medical knowledge and guidelines",
    ("medical_accuracy", "corrupted"):
        "less medically accurate, introducing subtle inconsistencies with established medical knowledge",
    ("diagnostic_relevance", "enhanced"):
        "more relevant to narrowing down the differential diagnosis",
    ("diagnostic_relevance", "corrupted"):
        "less relevant to the diagnostic picture",
    ("avoid_ddx_bias", "enhanced"):
        "more neutral, removing suggestive or leading wording that could bias the diagnostic reasoning",
    ("avoid_ddx_bias", "corrupted"):
        "more suggestive/leading, nudging the patient toward a particular diagnosis",
    ("coarse", "enhanced"): "a better clinical question overall",
    ("coarse", "corrupted"): "a worse clinical question overall",
}

CLARITY_TIPS = """Additional Tips for Clear Questions
Use specific time frames: Instead of "lately," try "in the past week" or "since your last visit."
Break down complex questions: If a question could be answered in multiple ways, consider asking two separate questions.
Avoid medical jargon: Use plain language that patients without a medical background can understand.

"""

PERTURBATION_TEMPLATE = """You are a medical assistant and your task is to rewrite medical questions posted to an online health forum to vary some of their properties. The goal is to generate these diverse counterfactual questions to study the properties of clinical questions. You will be given a patient's post, and the original clinician response, and you should rewrite the clinician response according to the instructions below.


***PATIENT POST***
{title}
{post}

***CLINICIAN RESPONSE***
{question}

***INSTRUCTION***
{instruction_block}

***REWRITTEN RESPONSE***
"""


def build_perturbation_instruction(attribute: str, direction: str) -> str:
    """Assemble the rewrite instruction for one attribute and direction."""
    try:
        phrase = DIRECTION_PHRASES[(attribute, direction)]
    except KeyError:
        raise PromptError(
            f"no rewrite phrasing for attribute {attribute!r}, "
            f"direction {direction!r}") from None
    definition = ATTRIBUTE_DEFINITIONS[attribute]
    anchors = ATTRIBUTE_SCALE_ANCHORS[attribute]
    tips = CLARITY_TIPS if attribute == "clarity" else ""
    return (
        f"Rewrite the clinician response so that it is {phrase}, while "
        "keeping everything else constant. The definition of this property "
        "and what it means for this property at varying scales are given "
        f"below:\n\nDefinition: {definition}\n{anchors}\n\n{tips}"
        "Please make the rewritten question more realistic -- something that "
        "clinicians would ask in an actual patient interaction.\n\n"
        "Return the rewritten question ONLY and do not include any other text."
    )


JUDGE_SYSTEM_TRIPLET = """Please act as an impartial judge and evaluate the quality of the responses provided by three medically trained AI assistants in a medical interaction. Carefully read the questions being asked by these expert systems as a response to the medical interaction and rank them in the provided dimensions. Begin your evaluation by comparing the three responses and provide a short explanation. Avoid any position biases and ensure that the order in which the responses were presented does not influence your decision. Do not allow the length of the responses to influence your evaluation. Ignore possible spelling or grammar mistakes and focus only on the content of the text. Be as objective as possible. The only ranking choice is ">" (greater than). For each dimension listed, provide your answer in the following example JSON format:
{
"dimension_name": {
    "ranking": "A > B > C",
    "reasoning": "Provide a clear and concise explanation for your ranking decision here."
  }
}
"""

JUDGE_SYSTEM_PAIR = """Please act as an impartial judge and evaluate the quality of the responses provided by two medically trained AI assistants in a medical interaction. Carefully read the questions being asked by these expert systems as a response to the medical interaction and rank them in the provided dimensions. Begin your evaluation by comparing the two responses and provide a short explanation. Avoid any position biases and ensure that the order in which the responses were presented does not influence your decision. Do not allow the length of the responses to influence your evaluation. Ignore possible spelling or grammar mistakes and focus only on the content of the text. Be as objective as possible. The only ranking choice is ">" (greater than). For each dimension listed, provide your answer in the following example JSON format:
{
"dimension_name": {
    "ranking": "A > B",
    "reasoning": "Provide a clear and concise explanation for your ranking decision here."
  }
}
"""

JUDGE_USER_TRIPLET = """Please carefully review the previous interaction below, which includes patient post, title, and subsequent responses if any.
***PREVIOUS MEDICAL INTERACTION***
{prev_context}
***MEDICAL AI QUESTIONS TO PATIENT***
- **Question A:** {question_a}
- **Question B:** {question_b}
- **Question C:** {question_c}
***EVALUATION DIMENSIONS***
{dimensions}
***SUPPLEMENTARY INFORMATION***
To help you evaluate the questions, please refer to the provided additional information regarding the final conclusion of this patient's case below:
Final diagnosis: {final_diagnosis}
Conclusion: {conclusion}"""

JUDGE_USER_PAIR = """Please carefully review the previous interaction below, which includes patient post, title, and subsequent responses if any.
***PREVIOUS MEDICAL INTERACTION***
{prev_context}
***MEDICAL AI QUESTIONS TO PATIENT***
- **Question A:** {question_a}
- **Question B:** {question_b}
***EVALUATION DIMENSIONS***
{dimensions}
***SUPPLEMENTARY INFORMATION***
To help you evaluate the questions, please refer to the provided additional information regarding the final conclusion of this patient's case below:
Final diagnosis: {final_diagnosis}
Conclusion: {conclusion}"""

JUDGE_FORMAT_REMINDER = (
    'Your previous reply could not be parsed. Respond with JSON only, exactly '
    'in the requested format, ranking every question with ">" and no ties.'
)


def build_dimension_block(dimension: str) -> str:
    definition = ATTRIBUTE_DEFINITIONS.get(dimension)
    if definition is None:
        raise PromptError(f"no rubric for dimension {dimension!r}")
    return f"- {dimension}: {definition}"


DECOMPOSE_THREAD = """You are analyzing a conversation from an online health forum between a patient and responders. Decompose it into its atomic parts.

***CONVERSATION***
{thread_text}

***TASK***
1. List every atomic information-seeking question a responder asks the patient. Split compound turns into separate questions. For each question, report the zero-based index of the conversation turn it appears in.
2. Extract the final conclusion or recommendation given to the patient, if any.
3. State whether the patient expressed positive feedback (for example, thanking the responder).
4. Extract the final diagnosis if one is stated.

Respond with JSON only, in exactly this shape:
{"questions": [{"turn_index": 0, "text": "..."}], "conclusion": null, "positive_feedback": false, "final_diagnosis": null}"""

MCQ_INITIAL_INFO = """You are preparing an interactive diagnostic case from a patient record. Extract the initial information a clinician would see at the start of the encounter: the patient's chief complaint and basic presentation, without the findings, answers, or conclusions that emerged later in the conversation.

Example:
Record: 25F, three days of burning with urination and frequent urges. Doctor asked about fever (none) and back pain (none). Conclusion: uncomplicated UTI, advised antibiotics.
Initial information: 25-year-old woman with three days of burning during urination and frequent urges to urinate.

***PATIENT RECORD***
{record}

Reply with the initial information only."""

MCQ_INQUIRY = """You are preparing an interactive diagnostic case from a patient record. Identify the patient's main inquiry (the health question they want answered) and the conclusion the responder reached, if any.

***PATIENT RECORD***
{record}

Respond with JSON only, in exactly this shape:
{"inquiry": "...", "conclusion": null}"""

MCQ_BUILD_SYSTEM = """You are an experienced expert working in the field of medicine education. Based on your understanding of basic and clinical science, medical knowledge, and mechanisms underlying health, disease, patient care, and modes of therapy, you are given a patient case and you are tasked to parse the patient's inquiry into a multiple choice question. The generated multiple choice should consist of a question and 4 options, which could be answered by the given patient conversation. Base your response on the current and standard practices referenced in medical guidelines. The created question should be answerable only with the patient information, rather than testing some hardcore scientific foundational knowledge recall. The questions should be faithful to the original patient's inquiry in their post. The correct answer should be correct, and the distractors should be plausible. The correct answer should be evenly distributed among the available options to enhance the quality and reliability of the questions. The output should be in json format."""

MCQ_BUILD_USER = """You could use some parsed auxiliary information such as the final diagnosis and conclusion. Make sure that the multiple choice question you generate is not too easy but also not impossible to answer. Based on this patient record, faithfully generate a multiple choice question according to the patient inquiry and store it in the following json format:

{
    "question": [generated question],
    "optionA": [option A],
    "optionB": [option B],
    "optionC": [option C],
    "optionD": [option D],
    "correct_answer": [A or B or C or D]
}

After you generate the question, do a round of revision. In your revision, you should:
1. Identify any medical inaccuracies in your first response, correct them if any exist.
2. Make sure the question is what the patient is asking for or concerned about in their post.
3. The correct answer is indeed correct; if none of the options are correct or more than one option is correct, revise the options to improve the question.
4. Ensure that the correct answer is in a random position among the available options (shuffle if necessary) to enhance the quality and reliability of the questions.
5. Guarantee that the json output is parsable.

Respond with the final revised question in the json format and NOTHING ELSE.

***PATIENT RECORD***
{record}

***AUXILIARY INFORMATION***
Inquiry: {inquiry}
Final diagnosis: {final_diagnosis}
Conclusion: {conclusion}"""

PATIENT_ANSWER = """You are playing the role of a patient in a clinical conversation. Everything you know is written in your medical record below. Answer the clinician's question truthfully using only facts from the record.

***PATIENT RECORD***
{record}

***CLINICIAN QUESTION***
{question}

***RULES***
- Use only information stated in the record. Do not invent details.
- Answer in one or two sentences, in the first person.
- If the record does not contain the information needed, reply with exactly: The patient cannot answer this question."""

ABSTENTION = """You are a clinician deciding whether you already have enough information to answer a patient's case or need to ask another question first.

***INITIAL PATIENT INFORMATION***
{initial_info}

***QUESTIONS ASKED SO FAR***
{qa_history}

First, reason briefly about what is known and what is still missing. Then rate, on a scale of 1 to 5, how confident you are that you can answer the patient's inquiry correctly right now (1 = far too little information, 5 = fully confident).

Respond in this format:
Rationale: <one or two sentences>
Confidence: <1-5>"""

ASK_QUESTION = """You are a clinician in an online consultation. Based on the information so far, ask the patient exactly one concise follow-up question that would most help you understand their situation.

***INITIAL PATIENT INFORMATION***
{initial_info}

***QUESTIONS ASKED SO FAR***
{qa_history}

Reply with the question only."""

DECISION = """You are a clinician answering a multiple choice question about a patient. Using the information gathered, choose the single best answer.

***INITIAL PATIENT INFORMATION***
{initial_info}

***QUESTIONS ASKED SO FAR***
{qa_history}

***INQUIRY***
{inquiry}

***OPTIONS***
{options_block}

Reply with the letter of the correct option (A, B, C, or D) and nothing else."""


TEMPLATES: dict[str, str] = {
    "perturbation": PERTURBATION_TEMPLATE,
    "judge_system_triplet": JUDGE_SYSTEM_TRIPLET,
    "judge_system_pair": JUDGE_SYSTEM_PAIR,
    "judge_user_triplet": JUDGE_USER_TRIPLET,
    "judge_user_pair": JUDGE_USER_PAIR,
    "decompose_thread": DECOMPOSE_THREAD,
    "mcq_initial_info": MCQ_INITIAL_INFO,
    "mcq_inquiry": MCQ_INQUIRY,
    "mcq_build_system": MCQ_BUILD_SYSTEM,
    "mcq_build_user": MCQ_BUILD_USER,
    "patient_answer": PATIENT_ANSWER,
    "abstention": ABSTENTION,
    "ask_question": ASK_QUESTION,
    "decision": DECISION,
}


def template_variables(template: str) -> list[str]:
    seen: list[str] = []
    for name in PLACEHOLDER_RE.findall(template):
        if name not in seen:
            seen.append(name)
    return seen


def render_prompt(template_id: str, variables: dict[str, str]) -> str:
    """Substitute placeholders; every placeholder must be bound."""
    try:
        template = TEMPLATES[template_id]
    except KeyError:
        raise UnknownTemplateError(template_id) from None
    required = template_variables(template)
    missing = [name for name in required if name not in variables]
    if missing:
        raise MissingVariableError(template_id, missing)

    def _sub(match: re.Match) -> str:
        return str(variables[match.group(1)])

    return PLACEHOLDER_RE.sub(_sub, template)
