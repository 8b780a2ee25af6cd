import json

import pytest

from askalign.corpus import ParsedThread, QuestionRecord, ThreadRecord, Turn
from askalign.gateway import MockBackend
from askalign.mocks import ranking_responder, tag_rank_key, variant_tagger


def make_thread(thread_id="t1", post_id=None, title="Sore throat for a week",
                body="It hurts when I swallow and I feel tired.",
                turns=None, expert=False):
    if turns is None:
        turns = [("responder", "How long ago did it start? Any fever?", expert),
                 ("patient", "About a week. No fever.", False)]
    return ThreadRecord(
        thread_id=thread_id,
        post_id=post_id or f"p-{thread_id}",
        title=title,
        post_body=body,
        turns=tuple(Turn(author_role=r, author_expert_verified=e, text=t)
                    for r, t, e in turns),
    )


def thread_line(thread: ThreadRecord) -> str:
    return json.dumps(thread.to_dict())


def make_question(qid="t1:q0", thread_id="t1", post_id="p-t1",
                  context="Sore throat for a week\nIt hurts when I swallow.",
                  text="Any fever?", expert=False):
    return QuestionRecord(question_id=qid, thread_id=thread_id,
                          post_id=post_id, context=context,
                          question_text=text,
                          author_expert_verified=expert)


def make_parsed(thread_id="t1", questions=(), conclusion=None,
                positive_feedback=False, final_diagnosis=None):
    return ParsedThread(thread_id=thread_id,
                        atomic_questions=tuple(questions),
                        conclusion=conclusion,
                        positive_feedback=positive_feedback,
                        final_diagnosis=final_diagnosis)


@pytest.fixture
def tagger_backend():
    """Generator mock echoing the source question with a direction tag."""
    return MockBackend(default=variant_tagger, name="tagger")


@pytest.fixture
def ideal_judge():
    """Judge mock realizing enhanced > original > corrupted."""
    return MockBackend(default=ranking_responder(tag_rank_key), name="judge")


def eo_inverting_key(text: str) -> int:
    """Strict order original > enhanced > corrupted: flips only the
    enhanced-vs-original comparison."""
    if "[enhanced]" in text:
        return 1
    if "[corrupted]" in text:
        return 2
    return 0


@pytest.fixture
def eo_inverting_judge():
    return MockBackend(default=ranking_responder(eo_inverting_key),
                       name="judge-eo-invert")
