import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from askalign.corpus import (ALL_QUALITY_GROUPS, CorpusError, IngestError,
                             InfeasibleSplitError, QualityGroup,
                             assign_quality_group, decompose_thread,
                             ingest_threads, label_questions,
                             serialize_thread, stratified_split)
from askalign.gateway import MockBackend

from .conftest import make_parsed, make_question, make_thread, thread_line


def decomposition_json(questions, conclusion=None, positive_feedback=False,
                       final_diagnosis=None):
    return json.dumps({
        "questions": questions,
        "conclusion": conclusion,
        "positive_feedback": positive_feedback,
        "final_diagnosis": final_diagnosis,
    })


class TestIngest:
    def test_three_record_fixture_gives_corpus_of_three(self):
        lines = [thread_line(make_thread(f"t{i}")) for i in range(3)]
        corpus = ingest_threads(lines)
        assert len(corpus) == 3
        assert corpus.unique_posts() == 3

    def test_duplicate_thread_id_error_names_id_and_lines(self):
        lines = [thread_line(make_thread("dup")),
                 thread_line(make_thread("dup"))]
        with pytest.raises(IngestError) as excinfo:
            ingest_threads(lines)
        message = str(excinfo.value)
        assert "dup" in message
        assert "line 1" in message and "line 2" in message

    def test_malformed_record_error_carries_line_number(self):
        lines = [thread_line(make_thread("ok")), "{broken",
                 json.dumps({"thread_id": "x"})]
        with pytest.raises(IngestError) as excinfo:
            ingest_threads(lines)
        assert "line 2" in str(excinfo.value)
        assert "line 3" in str(excinfo.value)

    def test_thread_without_responder_question_is_set_aside(self):
        eligible = make_thread("a")
        silent = make_thread("b", turns=[
            ("responder", "Sounds viral, rest up.", False),
            ("patient", "thanks", False)])
        corpus = ingest_threads([thread_line(eligible), thread_line(silent)])
        assert len(corpus) == 1
        assert corpus.ineligible == ["b"]

    def test_ingest_from_file(self, tmp_path):
        path = tmp_path / "threads.jsonl"
        path.write_text(thread_line(make_thread("f1")) + "\n")
        assert len(ingest_threads(path)) == 1


class TestDecompose:
    def test_scripted_mock_round_trip(self):
        thread = make_thread("t1")
        backend = MockBackend(default=decomposition_json(
            [{"turn_index": 0, "text": "How long ago did it start?"}],
            conclusion="Likely strep, see a doctor.",
            positive_feedback=True))
        parsed = decompose_thread(thread, backend.complete)
        assert [q.question_text for q in parsed.atomic_questions] == [
            "How long ago did it start?"]
        assert parsed.conclusion == "Likely strep, see a doctor."
        assert parsed.positive_feedback is True

    def test_question_mark_split_gives_two_atomic_questions(self):
        # Oracle: splitting the fixture turn on '?' by hand gives exactly
        # these two questions.
        thread = make_thread("t1", turns=[
            ("responder", "How long ago? Any fever?", False)])
        expected = ["How long ago?", "Any fever?"]
        backend = MockBackend(default=decomposition_json(
            [{"turn_index": 0, "text": t} for t in expected]))
        parsed = decompose_thread(thread, backend.complete)
        assert [q.question_text for q in parsed.atomic_questions] == expected

    def test_thank_you_closing_sets_positive_feedback(self):
        thread = make_thread("t1", turns=[
            ("responder", "Any fever?", False),
            ("patient", "No. Thank you so much!", False)])
        backend = MockBackend(default=decomposition_json(
            [{"turn_index": 0, "text": "Any fever?"}],
            positive_feedback=True))
        parsed = decompose_thread(thread, backend.complete)
        assert parsed.positive_feedback is True

    def test_context_is_prefix_of_thread_serialization(self):
        thread = make_thread("t1", turns=[
            ("responder", "Any fever?", False),
            ("patient", "No fever.", False),
            ("responder", "Any rash on the chest?", True)])
        backend = MockBackend(default=decomposition_json([
            {"turn_index": 0, "text": "Any fever?"},
            {"turn_index": 2, "text": "Any rash on the chest?"},
        ]))
        parsed = decompose_thread(thread, backend.complete)
        full = serialize_thread(thread)
        for q in parsed.atomic_questions:
            assert full.startswith(q.context)
        assert parsed.atomic_questions[1].context == serialize_thread(thread, upto=2)
        assert parsed.atomic_questions[1].author_expert_verified is True

    def test_deterministic_backend_means_idempotent_decomposition(self):
        thread = make_thread("t1")
        backend = MockBackend(default=decomposition_json(
            [{"turn_index": 0, "text": "Any fever?"}], conclusion="Rest."))
        first = decompose_thread(thread, backend.complete)
        second = decompose_thread(thread, backend.complete)
        assert first.to_dict() == second.to_dict()

    def test_unparseable_response_raises_with_raw_payload(self):
        from askalign.corpus import DecompositionError

        thread = make_thread("t1")
        backend = MockBackend(default="sorry, I cannot help with that")
        with pytest.raises(DecompositionError) as excinfo:
            decompose_thread(thread, backend.complete)
        assert "sorry" in excinfo.value.raw

    def test_out_of_range_turn_index_rejected(self):
        from askalign.corpus import DecompositionError

        thread = make_thread("t1")
        backend = MockBackend(default=decomposition_json(
            [{"turn_index": 9, "text": "Any fever?"}]))
        with pytest.raises(DecompositionError):
            decompose_thread(thread, backend.complete)


class TestQualityGroups:
    def test_expert_conclusion_feedback_all_true(self):
        q = make_question(expert=True)
        parsed = make_parsed(questions=[q], conclusion="strep",
                             positive_feedback=True)
        group = assign_quality_group(q, parsed)
        assert group == QualityGroup(True, True, True)

    def test_all_false(self):
        q = make_question()
        parsed = make_parsed(questions=[q])
        assert assign_quality_group(q, parsed) == QualityGroup(False, False, False)

    def test_exhaustive_enumeration_gives_eight_distinct_groups(self):
        # Oracle: enumerate all boolean triples directly.
        expected = {(e, c, f) for e in (True, False) for c in (True, False)
                    for f in (True, False)}
        seen = set()
        for e in (True, False):
            for c in (True, False):
                for f in (True, False):
                    q = make_question(expert=e)
                    parsed = make_parsed(
                        questions=[q],
                        conclusion="done" if c else None,
                        positive_feedback=f)
                    g = assign_quality_group(q, parsed)
                    seen.add((g.expert_author, g.has_conclusion,
                              g.has_positive_feedback))
        assert seen == expected
        assert len(ALL_QUALITY_GROUPS) == 8

    def test_mismatched_thread_ids_error(self):
        q = make_question(thread_id="a")
        parsed = make_parsed(thread_id="b")
        with pytest.raises(CorpusError):
            assign_quality_group(q, parsed)


def build_labeled_corpus(per_group=10, posts_per_question=True):
    """One question per post, per_group questions in each of the 8 groups."""
    labeled = []
    for gi, group in enumerate(ALL_QUALITY_GROUPS):
        for i in range(per_group):
            qid = f"g{gi}-q{i}"
            q = make_question(qid=qid, thread_id=f"g{gi}-t{i}",
                              post_id=f"g{gi}-p{i}",
                              expert=group.expert_author)
            labeled.append((q, group))
    return labeled


class TestStratifiedSplit:
    def test_even_contributions_on_balanced_fixture(self):
        # Oracle (brute-force feasibility check on the fixture): 8 groups x
        # 10 questions, request (40, 8, 8). Even draw means train takes
        # 40/8 = 5 per group, dev 8/8 = 1 per group, and the test split can
        # only touch the 4 conclusion groups, 8/4 = 2 each.
        labeled = build_labeled_corpus(per_group=10)
        split = stratified_split(labeled, (40, 8, 8), seed=3)
        group_of = {q.question_id: g for q, g in labeled}

        def contributions(ids):
            counts = {}
            for qid in ids:
                counts[group_of[qid]] = counts.get(group_of[qid], 0) + 1
            return counts

        train_c = contributions(split.train)
        dev_c = contributions(split.dev)
        test_c = contributions(split.test)
        assert all(train_c[g] == 5 for g in ALL_QUALITY_GROUPS)
        assert all(dev_c[g] == 1 for g in ALL_QUALITY_GROUPS)
        conclusion_groups = [g for g in ALL_QUALITY_GROUPS if g.has_conclusion]
        assert all(test_c[g] == 2 for g in conclusion_groups)
        assert all(g.has_conclusion for g in test_c)

    def test_same_seed_twice_identical(self):
        labeled = build_labeled_corpus()
        a = stratified_split(labeled, (40, 8, 8), seed=11)
        b = stratified_split(labeled, (40, 8, 8), seed=11)
        assert a == b

    def test_different_seed_differs(self):
        labeled = build_labeled_corpus()
        a = stratified_split(labeled, (40, 8, 8), seed=1)
        b = stratified_split(labeled, (40, 8, 8), seed=2)
        assert a != b

    def test_partition_properties(self):
        labeled = build_labeled_corpus()
        split = stratified_split(labeled, (40, 8, 8), seed=5)
        train, dev, test = set(split.train), set(split.dev), set(split.test)
        assert len(train) == 40 and len(dev) == 8 and len(test) == 8
        assert not (train & dev) and not (train & test) and not (dev & test)

    def test_shortfall_redistributes_round_robin(self):
        # First group has only 2 questions; a train request of 24 (3 per
        # group) leaves a deficit of 1 that must land on another group.
        labeled = []
        for gi, group in enumerate(ALL_QUALITY_GROUPS):
            n = 2 if gi == 0 else 10
            for i in range(n):
                q = make_question(qid=f"g{gi}-q{i}", thread_id=f"g{gi}-t{i}",
                                  post_id=f"g{gi}-p{i}")
                labeled.append((q, group))
        split = stratified_split(labeled, (24, 0, 0), seed=0)
        assert len(split.train) == 24

    def test_infeasible_sizes_report_availability(self):
        labeled = build_labeled_corpus(per_group=2)
        with pytest.raises(InfeasibleSplitError) as excinfo:
            stratified_split(labeled, (100, 0, 0), seed=0)
        assert excinfo.value.availability

    def test_no_post_overlap_when_questions_share_posts(self):
        labeled = []
        for gi, group in enumerate(ALL_QUALITY_GROUPS):
            for i in range(12):
                # Two questions share each post.
                q = make_question(qid=f"g{gi}-q{i}",
                                  thread_id=f"g{gi}-t{i // 2}",
                                  post_id=f"g{gi}-p{i // 2}")
                labeled.append((q, group))
        split = stratified_split(labeled, (30, 10, 10), seed=9)
        post_of = {q.question_id: q.post_id for q, _ in labeled}
        posts = {name: {post_of[qid] for qid in ids}
                 for name, ids in split.as_sets().items()}
        assert not (posts["train"] & posts["dev"])
        assert not (posts["train"] & posts["test"])
        assert not (posts["dev"] & posts["test"])

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 10_000),
           per_group=st.integers(3, 8),
           share=st.booleans())
    def test_property_partition_and_no_post_overlap(self, seed, per_group, share):
        labeled = []
        for gi, group in enumerate(ALL_QUALITY_GROUPS):
            for i in range(per_group):
                post = f"g{gi}-p{i // 2 if share else i}"
                q = make_question(qid=f"g{gi}-q{i}", thread_id=post,
                                  post_id=post)
                labeled.append((q, group))
        sizes = (per_group * 2, 4, 4)
        try:
            split = stratified_split(labeled, sizes, seed=seed)
        except InfeasibleSplitError:
            return
        ids = list(split.train) + list(split.dev) + list(split.test)
        assert len(ids) == len(set(ids)) == sum(sizes)
        post_of = {q.question_id: q.post_id for q, _ in labeled}
        posts = {name: {post_of[qid] for qid in members}
                 for name, members in split.as_sets().items()}
        assert not (posts["train"] & posts["dev"])
        assert not (posts["train"] & posts["test"])
        assert not (posts["dev"] & posts["test"])
        group_of = {q.question_id: g for q, g in labeled}
        assert all(group_of[qid].has_conclusion for qid in split.test)

    def test_split_manifest_round_trip(self, tmp_path):
        from askalign.corpus import SplitAssignment

        labeled = build_labeled_corpus()
        split = stratified_split(labeled, (16, 8, 8), seed=2)
        path = tmp_path / "split.json"
        split.save(path)
        assert SplitAssignment.load(path) == split


class TestLabelQuestions:
    def test_labels_follow_parent_thread(self):
        q1 = make_question(qid="a:q0", thread_id="a", expert=True)
        q2 = make_question(qid="a:q1", thread_id="a")
        parsed = make_parsed(thread_id="a", questions=[q1, q2],
                             conclusion="strep")
        labeled = label_questions([parsed])
        assert [g for _, g in labeled] == [
            QualityGroup(True, True, False), QualityGroup(False, True, False)]
