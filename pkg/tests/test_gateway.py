import json
import random
import threading

import pytest

from askalign.gateway import (APIError, CompletionRequest, CompletionResponse,
                              EndpointConfig, Endpoint, Gateway, Message,
                              MockBackend, MockScriptError, ResponseCache,
                              TransportError, backoff_schedule, canonical_json,
                              echo_last_user, request_digest)
from askalign.prompts import (MissingVariableError, UnknownTemplateError,
                              render_prompt)


def req(text="hello", **kwargs):
    return CompletionRequest.chat(model="m", user=text, **kwargs)


def make_endpoint(backend, retries=3, name="ep"):
    cfg = EndpointConfig(name=name, model="m", max_retries=retries,
                         backoff_base_s=0.0)
    return Endpoint(cfg, backend, sleep=lambda _s: None)


class TestRequestValidation:
    def test_empty_messages_rejected(self):
        with pytest.raises(ValueError):
            CompletionRequest(model="m", messages=())

    def test_first_role_must_open_conversation(self):
        with pytest.raises(ValueError):
            CompletionRequest(model="m",
                              messages=(Message("assistant", "hi"),))

    def test_negative_temperature_rejected(self):
        with pytest.raises(ValueError):
            req(temperature=-0.1)

    def test_bad_role_rejected(self):
        with pytest.raises(ValueError):
            Message("tool", "x")


class TestComplete:
    def test_echo_mock_returns_last_user_message(self):
        ep = make_endpoint(MockBackend(default=echo_last_user))
        assert ep.complete(req("tell me")).text == "tell me"

    def test_fail_twice_then_succeed_records_two_retries(self):
        backend = MockBackend(default="ok").fail_next(2)
        ep = make_endpoint(backend, retries=3)
        resp = ep.complete(req())
        assert resp.text == "ok"
        assert resp.retries == 2

    def test_retry_cap_one_against_always_failing_mock(self):
        backend = MockBackend(default="never")
        backend.fail_next(10)
        ep = make_endpoint(backend, retries=1)
        with pytest.raises(TransportError):
            ep.complete(req())

    def test_non_retryable_api_error_propagates_immediately(self):
        backend = MockBackend(default="x")
        backend.fail_next(1, exc=APIError(400, "bad request"))
        ep = make_endpoint(backend, retries=3)
        with pytest.raises(APIError) as excinfo:
            ep.complete(req())
        assert excinfo.value.status == 400
        assert backend.call_count == 1

    def test_retryable_api_error_is_retried(self):
        backend = MockBackend(default="ok")
        backend.fail_next(1, exc=APIError(429, "slow down"))
        ep = make_endpoint(backend, retries=2)
        assert ep.complete(req()).text == "ok"

    def test_unscripted_mock_raises(self):
        ep = make_endpoint(MockBackend())
        with pytest.raises(MockScriptError):
            ep.complete(req())

    def test_backoff_schedule_monotone_nondecreasing(self):
        for base, cap, n in [(0.5, 30, 10), (1, 4, 8), (0.1, 0.1, 5)]:
            schedule = backoff_schedule(base, cap, n)
            assert all(a <= b for a, b in zip(schedule, schedule[1:]))
            assert all(d <= cap for d in schedule)


class TestMockScripting:
    def test_pattern_rules_match_in_order(self):
        backend = MockBackend(default="fallback")
        backend.script(r"fever", "ask about fever")
        backend.script(r".", "anything")
        ep = make_endpoint(backend)
        assert ep.complete(req("any fever?")).text == "ask about fever"
        assert ep.complete(req("cough")).text == "anything"

    def test_enqueued_responses_take_precedence(self):
        backend = MockBackend(default="fallback").enqueue("first", "second")
        ep = make_endpoint(backend)
        assert ep.complete(req()).text == "first"
        assert ep.complete(req()).text == "second"
        assert ep.complete(req()).text == "fallback"


class TestCacheKey:
    def test_equal_requests_equal_digests(self):
        assert request_digest("ep", req("a")) == request_digest("ep", req("a"))

    def test_any_field_change_changes_digest(self):
        base = request_digest("ep", req("a"))
        assert request_digest("ep", req("b")) != base
        assert request_digest("ep2", req("a")) != base
        assert request_digest("ep", req("a", temperature=0.5)) != base
        assert request_digest("ep", req("a", max_tokens=9)) != base
        assert request_digest("ep", req("a", seed=1)) != base

    def test_whitespace_in_content_is_significant(self):
        assert request_digest("ep", req("a ")) != request_digest("ep", req("a"))


class TestResponseCache:
    def test_round_trip_byte_exact(self, tmp_path):
        cache = ResponseCache(tmp_path)
        value = CompletionResponse(text="v", prompt_tokens=3).to_dict()
        cache.store("k" * 64, value)
        loaded = cache.load("k" * 64)
        assert canonical_json(loaded) == canonical_json(value)

    def test_corrupt_entry_treated_as_miss(self, tmp_path):
        cache = ResponseCache(tmp_path)
        cache.store("k" * 64, {"text": "v"})
        path = tmp_path / ("k" * 64 + ".json")
        path.write_text("{not json", encoding="utf-8")
        assert cache.load("k" * 64) is None

    def test_key_mismatch_treated_as_miss(self, tmp_path):
        cache = ResponseCache(tmp_path)
        path = tmp_path / ("a" * 64 + ".json")
        path.write_text(json.dumps({"key": "b" * 64, "response": {"text": "x"}}))
        assert cache.load("a" * 64) is None

    def test_concurrent_writers_one_intact_winner(self, tmp_path):
        cache = ResponseCache(tmp_path)
        errors = []

        def write(i):
            try:
                for _ in range(50):
                    cache.store("k" * 64, {"text": f"writer-{i}"})
            except Exception as exc:  # noqa: BLE001
                errors.append(exc)

        threads = [threading.Thread(target=write, args=(i,)) for i in range(4)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert not errors
        loaded = cache.load("k" * 64)
        assert loaded is not None and loaded["text"].startswith("writer-")


class TestCachedComplete:
    def test_backend_invoked_exactly_once_for_identical_requests(self, tmp_path):
        gw = Gateway(cache_dir=tmp_path)
        backend = gw.register_mock("mock", MockBackend(default="resp"))
        r = req("same")
        first = gw.cached_complete("mock", r)
        second = gw.cached_complete("mock", r)
        assert backend.call_count == 1
        assert first.cached is False and second.cached is True
        assert first.text == second.text

    def test_temperature_change_means_two_invocations(self, tmp_path):
        gw = Gateway(cache_dir=tmp_path)
        backend = gw.register_mock("mock", MockBackend(default="resp"))
        gw.cached_complete("mock", req("x", temperature=0.0))
        gw.cached_complete("mock", req("x", temperature=1.0))
        assert backend.call_count == 2

    def test_thousand_random_request_replay_hits_cache_fully(self, tmp_path):
        gw = Gateway(cache_dir=tmp_path)
        backend = gw.register_mock("mock", MockBackend(default=echo_last_user))
        rng = random.Random(7)
        requests = [req(f"prompt {rng.randrange(10_000)} {i}",
                        temperature=rng.choice([0.0, 0.6, 1.0]))
                    for i in range(1000)]
        for r in requests:
            gw.cached_complete("mock", r)
        calls_after_first_pass = backend.call_count
        replays = [gw.cached_complete("mock", r) for r in requests]
        assert backend.call_count == calls_after_first_pass
        assert all(r.cached for r in replays)

    def test_in_flight_limit_is_respected(self, tmp_path):
        active = []
        peak = []
        lock = threading.Lock()

        class SlowBackend:
            def complete(self, request):
                with lock:
                    active.append(1)
                    peak.append(len(active))
                import time

                time.sleep(0.005)
                with lock:
                    active.pop()
                return CompletionResponse(text="ok")

        cfg = EndpointConfig(name="slow", model="m", max_in_flight=2)
        ep = Endpoint(cfg, SlowBackend(), sleep=lambda _s: None)
        threads = [threading.Thread(target=lambda: ep.complete(req(str(i))))
                   for i in range(8)]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert max(peak) <= 2


class TestRenderPrompt:
    def test_substitution_contains_all_variables_verbatim(self):
        from askalign.prompts import build_perturbation_instruction

        text = render_prompt("perturbation", {
            "title": "TITLE-XYZ", "post": "POST-BODY-123",
            "question": "QUESTION-ABC?",
            "instruction_block": build_perturbation_instruction(
                "clarity", "enhanced"),
        })
        assert "TITLE-XYZ" in text
        assert "POST-BODY-123" in text
        assert "QUESTION-ABC?" in text

    def test_missing_variable_error_names_it(self):
        with pytest.raises(MissingVariableError) as excinfo:
            render_prompt("judge_user_triplet", {
                "prev_context": "c", "question_a": "a", "question_b": "b",
                "dimensions": "d", "final_diagnosis": "x", "conclusion": "y",
            })
        assert "question_c" in str(excinfo.value)

    def test_unknown_template_error(self):
        with pytest.raises(UnknownTemplateError):
            render_prompt("nope", {})

    def test_judge_system_contains_ranking_format_block(self):
        text = render_prompt("judge_system_triplet", {})
        assert '"ranking": "A > B > C"' in text
        assert 'The only ranking choice is ">" (greater than)' in text

    def test_corrupted_clarity_instruction_wording(self):
        from askalign.prompts import build_perturbation_instruction

        block = build_perturbation_instruction("clarity", "corrupted")
        assert "less clear/more ambiguous" in block
