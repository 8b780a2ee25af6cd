import json

import pytest

from askalign.gateway import MockBackend
from askalign.judging import (JudgeParseError, JudgeVerdict,
                              MissingVerdictsError, UnjudgedPairsError,
                              compare_candidates, global_filtered_percent,
                              judge_pairset, predicted_kept_count,
                              retention_report, verify_direction)
from askalign.mocks import positional_responder, ranking_responder
from askalign.synthesis import Attribute, parse_attributes, synthesize_corpus

from .conftest import eo_inverting_key, make_question


def lexicographic_judge():
    return MockBackend(default=ranking_responder(lambda t: t))


def make_pairset(n_questions=2, attrs=("clarity",), backend=None):
    from askalign.mocks import variant_tagger

    backend = backend or MockBackend(default=variant_tagger)
    questions = [make_question(qid=f"t{i}:q0", thread_id=f"t{i}",
                               post_id=f"p{i}", text=f"Question {i}?")
                 for i in range(n_questions)]
    return synthesize_corpus(questions, parse_attributes(attrs),
                             backend.complete)


class TestCompareCandidates:
    def test_lexicographic_mock_consistent_across_both_orders(self):
        backend = lexicographic_judge()
        verdicts = compare_candidates(
            "ctx", [("x", "apple pie?"), ("y", "banana split?")],
            "clarity", backend.complete)
        assert len(verdicts) == 2
        # Oracle: 'apple pie?' < 'banana split?' lexicographically, so the
        # deterministic mock must put x first regardless of order.
        for v in verdicts:
            assert v.ranked_candidates[0] == "x"

    def test_positional_mock_disagrees_across_orders(self):
        backend = MockBackend(default=positional_responder())
        verdicts = compare_candidates(
            "ctx", [("x", "apple?"), ("y", "banana?")],
            "clarity", backend.complete)
        winners = {v.ranked_candidates[0] for v in verdicts}
        assert winners == {"x", "y"}

    def test_three_candidate_ranking_parsed_from_judge_json(self):
        backend = MockBackend(default=json.dumps({
            "clarity": {"ranking": "A > B > C", "reasoning": "because"}}))
        verdicts = compare_candidates(
            "ctx", [("e", "one?"), ("o", "two?"), ("c", "three?")],
            "clarity", backend.complete, orders=[(0, 1, 2)])
        assert verdicts[0].ranking == ("A", "B", "C")
        assert verdicts[0].ranked_candidates == ("e", "o", "c")
        assert verdicts[0].reasoning == "because"

    def test_label_permutation_refers_to_same_underlying_candidates(self):
        backend = lexicographic_judge()
        base = compare_candidates("ctx", [("x", "aa?"), ("y", "bb?")],
                                  "focus", backend.complete)
        swapped = compare_candidates("ctx", [("y", "bb?"), ("x", "aa?")],
                                     "focus", backend.complete)
        assert {v.ranked_candidates for v in base} == \
               {v.ranked_candidates for v in swapped}

    def test_tie_in_ranking_is_a_parse_error(self):
        backend = MockBackend(default=json.dumps({
            "clarity": {"ranking": "A = B", "reasoning": "same"}}))
        with pytest.raises(JudgeParseError):
            compare_candidates("ctx", [("x", "a?"), ("y", "b?")],
                               "clarity", backend.complete)

    def test_reprompt_recovers_then_fails(self):
        good = json.dumps({"clarity": {"ranking": "A > B", "reasoning": ""}})
        backend = MockBackend(default=good).enqueue("no json here")
        verdicts = compare_candidates("ctx", [("x", "a?"), ("y", "b?")],
                                      "clarity", backend.complete,
                                      orders=[(0, 1)])
        assert verdicts[0].ranked_candidates == ("x", "y")
        assert backend.call_count == 2

        always_bad = MockBackend(default="still not json")
        with pytest.raises(JudgeParseError) as excinfo:
            compare_candidates("ctx", [("x", "a?"), ("y", "b?")],
                               "clarity", always_bad.complete, orders=[(0, 1)])
        assert "still not json" in excinfo.value.raw

    def test_identical_candidates_rejected(self):
        backend = lexicographic_judge()
        with pytest.raises(Exception):
            compare_candidates("ctx", [("x", "same?"), ("y", "same?")],
                               "clarity", backend.complete)

    def test_aux_information_rendered_into_prompt(self):
        backend = lexicographic_judge()
        compare_candidates("ctx", [("x", "a?"), ("y", "b?")], "clarity",
                           backend.complete,
                           aux={"final_diagnosis": "DX-42",
                                "conclusion": "CONCL-7"})
        prompt = "\n".join(m.content for m in backend.calls[0].messages)
        assert "DX-42" in prompt and "CONCL-7" in prompt


class TestVerifyDirection:
    def _verdict(self, ranked, dimension="clarity"):
        return JudgeVerdict(dimension=dimension,
                            presentation_order=tuple(ranked),
                            ranking=tuple("AB"[:len(ranked)]),
                            ranked_candidates=tuple(ranked))

    def _pair(self, pair_type="EO"):
        from askalign.synthesis import PairType, PreferencePair

        members = {"EO": ("e-text?", "o-text?"),
                   "EC": ("e-text?", "c-text?"),
                   "OC": ("o-text?", "c-text?")}[pair_type]
        return PreferencePair(pair_id=f"q:clarity:{pair_type}", context="ctx",
                              chosen=members[0], rejected=members[1],
                              attribute=Attribute.CLARITY,
                              pair_type=PairType(pair_type), question_id="q")

    def test_unanimous_preference_keeps(self):
        pair = self._pair("EO")
        verdicts = [self._verdict(["enhanced", "original"]),
                    self._verdict(["enhanced", "original"])]
        assert verify_direction(pair, verdicts) is True
        assert pair.kept is True

    def test_split_verdicts_discard(self):
        pair = self._pair("EO")
        verdicts = [self._verdict(["enhanced", "original"]),
                    self._verdict(["original", "enhanced"])]
        assert verify_direction(pair, verdicts) is False

    def test_monotone_adding_verdicts_only_flips_true_to_false(self):
        pair = self._pair("EC")
        agreeing = [self._verdict(["enhanced", "original", "corrupted"])]
        assert verify_direction(pair, agreeing) is True
        disagreeing = agreeing + [self._verdict(
            ["corrupted", "original", "enhanced"])]
        assert verify_direction(pair, disagreeing) is False
        # And once False, more verdicts can never make it True again.
        assert verify_direction(pair, disagreeing + agreeing) is False

    def test_missing_verdicts_error(self):
        pair = self._pair("EO")
        with pytest.raises(MissingVerdictsError):
            verify_direction(pair, [])
        wrong_dim = [self._verdict(["enhanced", "original"],
                                   dimension="focus")]
        with pytest.raises(MissingVerdictsError):
            verify_direction(pair, wrong_dim)


class TestJudgePairset:
    def test_ideal_mock_keeps_everything(self, tagger_backend, ideal_judge):
        pairset = make_pairset(backend=tagger_backend)
        failures = judge_pairset(pairset, ideal_judge.complete)
        assert not failures
        assert all(p.kept is True for p in pairset.pairs)

    def test_eo_inverting_mock_kills_exactly_eo(self, tagger_backend,
                                                eo_inverting_judge):
        pairset = make_pairset(backend=tagger_backend)
        judge_pairset(pairset, eo_inverting_judge.complete)
        for pair in pairset.pairs:
            expected = pair.pair_type.value != "EO"
            assert pair.kept is expected

    def test_triplet_judging_uses_two_calls_per_group(self, tagger_backend,
                                                      ideal_judge):
        pairset = make_pairset(n_questions=3, backend=tagger_backend)
        judge_pairset(pairset, ideal_judge.complete)
        assert ideal_judge.call_count == 3 * 2

    def test_pairwise_mode_judges_each_pair(self, tagger_backend, ideal_judge):
        pairset = make_pairset(n_questions=1, backend=tagger_backend)
        judge_pairset(pairset, ideal_judge.complete, triplet=False)
        assert all(p.kept is True for p in pairset.pairs)
        assert ideal_judge.call_count == 3 * 2

    def test_verdicts_attached_to_pairs(self, tagger_backend, ideal_judge):
        pairset = make_pairset(n_questions=1, backend=tagger_backend)
        judge_pairset(pairset, ideal_judge.complete)
        for pair in pairset.pairs:
            assert len(pair.verdicts) == 2
            assert pair.verdicts[0]["dimension"] == "clarity"

    def test_failures_collected_per_group(self, tagger_backend):
        pairset = make_pairset(n_questions=2, backend=tagger_backend)
        bad_judge = MockBackend(default="not json at all")
        failures = judge_pairset(pairset, bad_judge.complete)
        assert len(failures) == 2
        assert all(p.kept is None for p in pairset.pairs)


class TestRetentionReport:
    def test_ten_pairs_nine_kept_is_90_percent(self, tagger_backend,
                                               ideal_judge):
        pairset = make_pairset(n_questions=10, backend=tagger_backend)
        judge_pairset(pairset, ideal_judge.complete)
        pairset.pairs = [p for p in pairset.pairs
                         if p.pair_type.value == "EO"]
        pairset.pairs[0].kept = False
        report = retention_report(pairset)
        assert report.total == 10 and report.kept == 9
        assert report.global_kept_fraction == pytest.approx(0.9)
        assert "90.0%" in report.to_text()

    def test_unjudged_pairs_error_lists_count(self, tagger_backend):
        pairset = make_pairset(backend=tagger_backend)
        with pytest.raises(UnjudgedPairsError) as excinfo:
            retention_report(pairset)
        assert excinfo.value.count == len(pairset.pairs)

    def test_global_fraction_is_sum_ratio(self, tagger_backend, ideal_judge,
                                          eo_inverting_judge):
        pairset = make_pairset(n_questions=4, attrs=("clarity", "focus"),
                               backend=tagger_backend)
        judge_pairset(pairset, eo_inverting_judge.complete)
        report = retention_report(pairset)
        # EO all discarded, EC and OC all kept: 16 of 24.
        assert report.total == 24
        assert report.kept == 16
        assert report.global_kept_fraction == pytest.approx(16 / 24)

    def test_ec_retention_at_least_eo_and_oc_under_noisy_strict_order(
            self, tagger_backend):
        # Mirror of the observed pattern: scores put enhanced and corrupted
        # farthest apart, with noise occasionally flipping near neighbors.
        import random

        rng = random.Random(0)

        def noisy_key(text: str) -> float:
            base = {0: 0.0, 1: 1.0, 2: 2.0}[
                0 if "[enhanced]" in text else 2 if "[corrupted]" in text else 1]
            return base + rng.uniform(-0.8, 0.8)

        pairset = make_pairset(n_questions=40, backend=tagger_backend)
        judge = MockBackend(default=ranking_responder(noisy_key))
        judge_pairset(pairset, judge.complete)
        report = retention_report(pairset)
        ec = report.kept_fraction("clarity", "EC")
        eo = report.kept_fraction("clarity", "EO")
        oc = report.kept_fraction("clarity", "OC")
        assert ec >= eo and ec >= oc


class TestRetentionArithmetic:
    def test_predicted_kept_matches_closed_form(self):
        # Oracle: n * (r1 + r2 + r3) computed by hand for small numbers.
        assert predicted_kept_count(10, {"EC": 100.0, "EO": 100.0,
                                         "OC": 100.0}) == pytest.approx(30.0)
        assert predicted_kept_count(10, {"EC": 50.0, "EO": 0.0,
                                         "OC": 100.0}) == pytest.approx(15.0)

    def test_global_filtered_percent_mean_complement(self):
        assert global_filtered_percent(
            {"EC": 100.0, "EO": 100.0, "OC": 100.0}) == pytest.approx(0.0)
        assert global_filtered_percent(
            {"EC": 90.0, "EO": 80.0, "OC": 70.0}) == pytest.approx(20.0)
