"""Chat-completion gateway: one interface over HTTP endpoints and scriptable mocks.

Every LLM call in the toolkit goes through :class:`Endpoint`, which adds
retries with exponential backoff and a per-endpoint in-flight bound, and
optionally through :class:`Gateway`, which adds a content-addressed response
cache so reruns are free and byte-identical.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
import re
import tempfile
import threading
import time
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Optional

logger = logging.getLogger(__name__)

VALID_ROLES = ("system", "user", "assistant")


class GatewayError(Exception):
    """Base class for endpoint failures."""


class TransportError(GatewayError):
    """Connection-level failure, or retries exhausted on transient errors."""


class GatewayTimeout(TransportError):
    """The endpoint did not respond within the configured timeout."""


class APIError(GatewayError):
    """Non-2xx response carrying the status code and error body."""

    def __init__(self, status: int, body: str):
        super().__init__(f"API error {status}: {body[:500]}")
        self.status = status
        self.body = body

    @property
    def retryable(self) -> bool:
        return self.status in (429, 500, 502, 503, 504)


class MockScriptError(GatewayError):
    """A mock backend received a request no rule or queue entry covers."""


@dataclass(frozen=True)
class Message:
    role: str
    content: str

    def __post_init__(self):
        if self.role not in VALID_ROLES:
            raise ValueError(f"invalid message role: {self.role!r}")

    def to_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class CompletionRequest:
    """One chat-completion call. Content is significant byte for byte."""

    model: str
    messages: tuple[Message, ...]
    temperature: float = 1.0
    max_tokens: int = 512
    seed: Optional[int] = None

    def __post_init__(self):
        if not self.messages:
            raise ValueError("messages must be non-empty")
        if self.messages[0].role not in ("system", "user"):
            raise ValueError("first message must be system or user")
        if self.temperature < 0:
            raise ValueError("temperature must be >= 0")
        if self.max_tokens <= 0:
            raise ValueError("max_tokens must be positive")

    @staticmethod
    def chat(model: str, *, system: Optional[str] = None, user: str,
             temperature: float = 1.0, max_tokens: int = 512,
             seed: Optional[int] = None) -> "CompletionRequest":
        msgs = []
        if system is not None:
            msgs.append(Message("system", system))
        msgs.append(Message("user", user))
        return CompletionRequest(model=model, messages=tuple(msgs),
                                 temperature=temperature,
                                 max_tokens=max_tokens, seed=seed)

    def to_dict(self) -> dict:
        d = {
            "model": self.model,
            "messages": [m.to_dict() for m in self.messages],
            "temperature": self.temperature,
            "max_tokens": self.max_tokens,
        }
        if self.seed is not None:
            d["seed"] = self.seed
        return d


@dataclass
class CompletionResponse:
    text: str
    finish_reason: str = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cached: bool = False
    retries: int = 0

    def to_dict(self) -> dict:
        return {
            "text": self.text,
            "finish_reason": self.finish_reason,
            "usage": {
                "prompt_tokens": self.prompt_tokens,
                "completion_tokens": self.completion_tokens,
            },
        }

    @staticmethod
    def from_dict(d: dict, cached: bool = False) -> "CompletionResponse":
        usage = d.get("usage", {})
        return CompletionResponse(
            text=d["text"],
            finish_reason=d.get("finish_reason", "stop"),
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
            cached=cached,
        )


def canonical_json(obj) -> str:
    """Deterministic serialization: sorted keys, no whitespace normalization
    of values (content is significant)."""
    return json.dumps(obj, sort_keys=True, ensure_ascii=False,
                      separators=(",", ":"))


def request_digest(endpoint_id: str, req: CompletionRequest) -> str:
    payload = canonical_json({"endpoint": endpoint_id, "request": req.to_dict()})
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


def backoff_schedule(base: float, cap: float, attempts: int) -> list[float]:
    """Deterministic exponential backoff delays, monotone non-decreasing."""
    return [min(cap, base * (2 ** i)) for i in range(attempts)]


@dataclass(frozen=True)
class GenParams:
    """Generation parameters an operation forwards into its requests."""

    model: str = "default"
    temperature: float = 1.0
    max_tokens: int = 512
    seed: Optional[int] = None

    def request(self, *, user: str, system: Optional[str] = None) -> CompletionRequest:
        return CompletionRequest.chat(model=self.model, system=system, user=user,
                                      temperature=self.temperature,
                                      max_tokens=self.max_tokens, seed=self.seed)


@dataclass
class EndpointConfig:
    name: str
    model: str = "default"
    base_url: str = ""
    api_key_env: str = ""
    max_in_flight: int = 4
    timeout_s: float = 60.0
    max_retries: int = 3
    backoff_base_s: float = 0.5
    backoff_cap_s: float = 30.0

    # Keys consumed by mock backend construction, not by the endpoint.
    MOCK_SPEC_KEYS = frozenset({"type", "behavior", "rules", "responses",
                                "default"})

    @staticmethod
    def from_dict(name: str, d: dict) -> "EndpointConfig":
        known = {f for f in EndpointConfig.__dataclass_fields__ if f != "name"}
        unknown = set(d) - known - EndpointConfig.MOCK_SPEC_KEYS
        if unknown:
            raise ValueError(f"unknown endpoint config keys: {sorted(unknown)}")
        return EndpointConfig(name=name, **{k: v for k, v in d.items() if k in known})


class HTTPBackend:
    """OpenAI-compatible chat-completions client over requests."""

    def __init__(self, config: EndpointConfig):
        import requests

        self._requests = requests
        self.config = config
        self.session = requests.Session()

    def _headers(self) -> dict:
        headers = {"Content-Type": "application/json"}
        if self.config.api_key_env:
            key = os.environ.get(self.config.api_key_env)
            if not key:
                raise GatewayError(
                    f"credentials env var {self.config.api_key_env} is not set")
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        try:
            resp = self.session.post(url, headers=self._headers(),
                                     json=req.to_dict(),
                                     timeout=self.config.timeout_s)
        except self._requests.Timeout as exc:
            raise GatewayTimeout(str(exc)) from exc
        except self._requests.RequestException as exc:
            raise TransportError(str(exc)) from exc
        if resp.status_code != 200:
            raise APIError(resp.status_code, resp.text)
        body = resp.json()
        choice = body["choices"][0]
        usage = body.get("usage", {})
        return CompletionResponse(
            text=choice["message"]["content"],
            finish_reason=choice.get("finish_reason", "stop"),
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


class MockBackend:
    """Deterministic scriptable backend so every pipeline runs offline.

    Resolution order per request: pending failures, enqueued responses,
    (pattern, responder) rules in registration order, then the default.
    Responders may be strings or callables taking the request.
    """

    def __init__(self, default: Optional[Callable | str] = None, name: str = "mock"):
        self.name = name
        self.default = default
        self.rules: list[tuple[re.Pattern, Callable | str]] = []
        self.queue: deque = deque()
        self._failures: deque = deque()
        self.calls: list[CompletionRequest] = []
        self._lock = threading.Lock()

    def script(self, pattern: str, response: Callable | str) -> "MockBackend":
        self.rules.append((re.compile(pattern, re.DOTALL), response))
        return self

    def enqueue(self, *texts: str) -> "MockBackend":
        self.queue.extend(texts)
        return self

    def fail_next(self, n: int = 1, exc: Optional[Exception] = None) -> "MockBackend":
        for _ in range(n):
            self._failures.append(exc or TransportError("scripted failure"))
        return self

    @property
    def call_count(self) -> int:
        return len(self.calls)

    @staticmethod
    def _full_text(req: CompletionRequest) -> str:
        return "\n".join(m.content for m in req.messages)

    def _render(self, responder: Callable | str, req: CompletionRequest) -> str:
        return responder(req) if callable(responder) else responder

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        with self._lock:
            self.calls.append(req)
            if self._failures:
                raise self._failures.popleft()
            if self.queue:
                return CompletionResponse(text=str(self.queue.popleft()))
            text = self._full_text(req)
            for pattern, responder in self.rules:
                if pattern.search(text):
                    return CompletionResponse(text=self._render(responder, req))
            if self.default is not None:
                return CompletionResponse(text=self._render(self.default, req))
            raise MockScriptError(
                f"mock {self.name!r} has no rule for request: {text[:200]!r}")


def echo_last_user(req: CompletionRequest) -> str:
    """Default responder returning the last user message verbatim."""
    for m in reversed(req.messages):
        if m.role == "user":
            return m.content
    return req.messages[-1].content


class Endpoint:
    """A backend plus retry policy and an in-flight bound."""

    def __init__(self, config: EndpointConfig, backend,
                 sleep: Callable[[float], None] = time.sleep):
        self.config = config
        self.backend = backend
        self._sleep = sleep
        self._semaphore = threading.Semaphore(config.max_in_flight)

    @property
    def name(self) -> str:
        return self.config.name

    def complete(self, req: CompletionRequest) -> CompletionResponse:
        delays = backoff_schedule(self.config.backoff_base_s,
                                  self.config.backoff_cap_s,
                                  self.config.max_retries)
        attempts = self.config.max_retries + 1
        last_exc: Optional[Exception] = None
        for attempt in range(attempts):
            try:
                with self._semaphore:
                    resp = self.backend.complete(req)
                resp.retries = attempt
                return resp
            except APIError as exc:
                if not exc.retryable:
                    raise
                last_exc = exc
            except TransportError as exc:
                last_exc = exc
            if attempt < attempts - 1:
                self._sleep(delays[attempt])
        if isinstance(last_exc, GatewayTimeout):
            raise last_exc
        raise TransportError(
            f"endpoint {self.name!r}: retries exhausted "
            f"({self.config.max_retries})") from last_exc


class ResponseCache:
    """Content-addressed cache: one JSON file per request digest.

    Writes are atomic (temp file + rename), so concurrent writers of the
    same key leave exactly one intact winner. A file that fails the
    integrity check is treated as a miss with a warning.
    """

    def __init__(self, directory: str | Path):
        self.directory = Path(directory)
        self.directory.mkdir(parents=True, exist_ok=True)

    def _path(self, key: str) -> Path:
        return self.directory / f"{key}.json"

    def load(self, key: str) -> Optional[dict]:
        path = self._path(key)
        if not path.exists():
            return None
        try:
            payload = json.loads(path.read_text(encoding="utf-8"))
            if payload.get("key") != key or "response" not in payload:
                raise ValueError("key mismatch")
            return payload["response"]
        except (ValueError, KeyError, json.JSONDecodeError) as exc:
            logger.warning("cache entry %s failed integrity check (%s); "
                           "treating as miss", path.name, exc)
            return None

    def store(self, key: str, response: dict) -> None:
        payload = canonical_json({"key": key, "response": response})
        fd, tmp = tempfile.mkstemp(dir=self.directory, suffix=".tmp")
        try:
            with os.fdopen(fd, "w", encoding="utf-8") as f:
                f.write(payload)
            os.replace(tmp, self._path(key))
        except BaseException:
            if os.path.exists(tmp):
                os.unlink(tmp)
            raise


class Gateway:
    """Registry of named endpoints with an optional shared response cache.

    Safe to share across worker threads; per-endpoint semaphores bound
    concurrent backend calls.
    """

    def __init__(self, cache_dir: Optional[str | Path] = None,
                 sleep: Callable[[float], None] = time.sleep):
        self._endpoints: dict[str, Endpoint] = {}
        self._sleep = sleep
        self.cache = ResponseCache(cache_dir) if cache_dir else None
        self._counts: dict[str, int] = {}
        self._lock = threading.Lock()

    def register(self, config: EndpointConfig, backend) -> Endpoint:
        ep = Endpoint(config, backend, sleep=self._sleep)
        self._endpoints[config.name] = ep
        return ep

    def register_mock(self, name: str, backend: Optional[MockBackend] = None,
                      **config_kwargs) -> MockBackend:
        backend = backend or MockBackend(name=name)
        cfg = EndpointConfig(name=name, model="mock", **config_kwargs)
        self.register(cfg, backend)
        return backend

    def endpoint(self, name: str) -> Endpoint:
        try:
            return self._endpoints[name]
        except KeyError:
            raise GatewayError(f"unknown endpoint: {name!r}") from None

    def backend_calls(self, name: str) -> int:
        return self._counts.get(name, 0)

    def complete(self, endpoint_name: str, req: CompletionRequest) -> CompletionResponse:
        ep = self.endpoint(endpoint_name)
        resp = ep.complete(req)
        with self._lock:
            self._counts[endpoint_name] = self._counts.get(endpoint_name, 0) + 1
        return resp

    def cached_complete(self, endpoint_name: str,
                        req: CompletionRequest) -> CompletionResponse:
        if self.cache is None:
            return self.complete(endpoint_name, req)
        key = request_digest(endpoint_name, req)
        hit = self.cache.load(key)
        if hit is not None:
            return CompletionResponse.from_dict(hit, cached=True)
        resp = self.complete(endpoint_name, req)
        self.cache.store(key, resp.to_dict())
        return resp


def load_endpoints(gateway: Gateway, endpoint_specs: dict,
                   mock_factory: Optional[Callable[[dict], MockBackend]] = None) -> None:
    """Register endpoints from a config mapping of name -> settings dict.

    An entry with type "mock" builds a scripted MockBackend (via the
    factory, which receives the entry); anything else builds an HTTP
    backend.
    """
    for name, spec in endpoint_specs.items():
        cfg = EndpointConfig.from_dict(name, spec)
        if spec.get("type") == "mock":
            if mock_factory is None:
                raise GatewayError(f"endpoint {name!r} is a mock but no "
                                   "mock factory was provided")
            gateway.register(cfg, mock_factory(spec))
        else:
            gateway.register(cfg, HTTPBackend(cfg))
