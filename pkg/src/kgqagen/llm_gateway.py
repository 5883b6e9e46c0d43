"""Provider-agnostic chat-completion client.

One wire dialect (OpenAI-compatible chat completions over JSON/HTTPS)
covers every hosted provider we target; provider choice is configuration.
The gateway layers token-bucket rate limiting and bounded exponential
backoff retries over a minimal provider interface. A deterministic mock
provider makes the whole pipeline reproducible without network access:
its responses are a pure function of the request content.
"""

from __future__ import annotations

import hashlib
import json
import logging
import random
import re
import threading
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol

import httpx

logger = logging.getLogger(__name__)


class ProviderError(RuntimeError):
    """Non-transient provider failure (auth, bad request, content policy)."""


class TransientProviderError(ProviderError):
    """Retryable failure: rate limit, server error, timeout."""


class RetryBudgetExhaustedError(ProviderError):
    """All retry attempts failed with transient errors."""


class RequestValidationError(ValueError):
    """Request rejected before dispatch."""


@dataclass(frozen=True, slots=True)
class ChatRequest:
    system_prompt: str
    user_prompt: str
    temperature: float
    max_output_tokens: int = 2048
    model_id: str = ""

    def __post_init__(self) -> None:
        if not self.system_prompt or not self.user_prompt:
            raise RequestValidationError("prompts must be non-empty")
        if not 0.0 <= self.temperature <= 2.0:
            raise RequestValidationError(
                f"temperature must be in [0, 2], got {self.temperature}"
            )
        if self.max_output_tokens <= 0:
            raise RequestValidationError("max_output_tokens must be positive")


@dataclass(frozen=True)
class ChatResponse:
    text: str
    provider_metadata: dict[str, Any] = field(default_factory=dict)
    latency: float = 0.0
    attempt_count: int = 1


def request_key(req: ChatRequest) -> str:
    """Stable digest of the request content (prompts, temperature, model)."""
    h = hashlib.sha256()
    for part in (req.system_prompt, req.user_prompt, f"{req.temperature:.6f}", req.model_id):
        h.update(part.encode("utf-8"))
        h.update(b"\x00")
    return h.hexdigest()


class Provider(Protocol):
    def complete_once(self, req: ChatRequest) -> tuple[str, dict[str, Any]]: ...


class TokenBucket:
    """Token bucket limiter; with the default capacity of one token, grants

    are spaced at least 60/rate_per_minute seconds apart, so no 60-second
    window ever sees more than rate_per_minute requests. Larger capacities
    trade that strict bound for burst throughput.
    """

    def __init__(
        self,
        rate_per_minute: float,
        capacity: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if rate_per_minute <= 0:
            raise ValueError("rate_per_minute must be positive")
        self._rate = rate_per_minute / 60.0
        self._capacity = max(1.0, capacity)
        self._tokens = self._capacity
        self._clock = clock
        self._sleeper = sleeper
        self._last = clock()
        self._lock = threading.Lock()

    def _refill(self) -> None:
        now = self._clock()
        self._tokens = min(self._capacity, self._tokens + (now - self._last) * self._rate)
        self._last = now

    def acquire(self) -> None:
        with self._lock:
            self._refill()
            while self._tokens < 1.0:
                self._sleeper((1.0 - self._tokens) / self._rate)
                self._refill()
            self._tokens -= 1.0


class LlmGateway:
    """Retrying, rate-limited front end over one provider."""

    def __init__(
        self,
        provider: Provider,
        *,
        max_attempts: int = 3,
        backoff_seconds: float = 1.0,
        requests_per_minute: float = 600.0,
        burst: float = 1.0,
        clock: Callable[[], float] = time.monotonic,
        sleeper: Callable[[float], None] = time.sleep,
    ):
        if max_attempts < 1:
            raise ValueError("max_attempts must be at least 1")
        self._provider = provider
        self._max_attempts = max_attempts
        self._backoff = backoff_seconds
        self._clock = clock
        self._sleeper = sleeper
        self._bucket = TokenBucket(requests_per_minute, burst, clock, sleeper)

    def complete(self, req: ChatRequest) -> ChatResponse:
        last_error: TransientProviderError | None = None
        for attempt in range(1, self._max_attempts + 1):
            self._bucket.acquire()
            started = self._clock()
            try:
                text, metadata = self._provider.complete_once(req)
            except TransientProviderError as exc:
                last_error = exc
                logger.warning(
                    "transient provider failure on attempt %d/%d: %s",
                    attempt,
                    self._max_attempts,
                    exc,
                )
                if attempt < self._max_attempts:
                    # deterministic backoff, no jitter: reproducibility matters more
                    # here than thundering-herd protection
                    self._sleeper(self._backoff * 2 ** (attempt - 1))
                continue
            return ChatResponse(
                text=text,
                provider_metadata=metadata,
                latency=self._clock() - started,
                attempt_count=attempt,
            )
        raise RetryBudgetExhaustedError(
            f"gave up after {self._max_attempts} attempt(s): {last_error}"
        ) from last_error


class OpenAiCompatProvider:
    """Chat-completions client for any OpenAI-compatible HTTP endpoint."""

    def __init__(
        self,
        base_url: str,
        api_key: str | None = None,
        *,
        timeout_seconds: float = 60.0,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"Content-Type": "application/json"}
        if api_key:
            headers["Authorization"] = f"Bearer {api_key}"
        self._client = httpx.Client(
            base_url=base_url.rstrip("/"),
            headers=headers,
            timeout=timeout_seconds,
            transport=transport,
        )

    def complete_once(self, req: ChatRequest) -> tuple[str, dict[str, Any]]:
        body = {
            "model": req.model_id,
            "messages": [
                {"role": "system", "content": req.system_prompt},
                {"role": "user", "content": req.user_prompt},
            ],
            "temperature": req.temperature,
            "max_tokens": req.max_output_tokens,
        }
        try:
            response = self._client.post("/chat/completions", json=body)
        except (httpx.TimeoutException, httpx.TransportError) as exc:
            raise TransientProviderError(f"transport failure: {exc}") from exc
        if response.status_code == 429 or response.status_code >= 500:
            raise TransientProviderError(f"provider returned HTTP {response.status_code}")
        if response.status_code >= 400:
            raise ProviderError(
                f"provider rejected request with HTTP {response.status_code}: "
                f"{response.text[:200]}"
            )
        try:
            payload = response.json()
            text = payload["choices"][0]["message"]["content"]
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise ProviderError(f"unexpected response shape: {exc}") from exc
        metadata = {
            "status": response.status_code,
            "model": payload.get("model", req.model_id),
            "usage": payload.get("usage", {}),
        }
        return text, metadata

    def close(self) -> None:
        self._client.close()


class FixtureProvider:
    """Canned responses keyed by request digest; for tests and replay."""

    def __init__(self, fixtures: dict[str, str], default: str | None = None):
        self._fixtures = fixtures
        self._default = default

    def complete_once(self, req: ChatRequest) -> tuple[str, dict[str, Any]]:
        key = request_key(req)
        text = self._fixtures.get(key, self._default)
        if text is None:
            raise ProviderError(f"no fixture for request {key[:12]}")
        return text, {"provider": "fixture", "key": key}


_TRIPLE_LINE_RE = re.compile(r"\(([^()\n]*)\)")

_GENERATION_MARKER = "question-answer pairs from knowledge graph triples"
_QUESTION_JUDGE_MARKER = "quality and validity of trivia"
_ANSWER_JUDGE_MARKER = "validity and adequacy of an answer"


class MockProvider:
    """Deterministic stand-in for a hosted model.

    Recognizes the pipeline's three prompt families and answers each with
    schema-correct JSON derived purely from the request digest, so a fixed
    (prompt, temperature, model) always yields the same bytes. Generation
    responses reuse triples found in the prompt, which keeps the fabricated
    answer paths grounded. Assumes serialized labels contain no commas or
    parentheses, which holds for the bundled synthetic corpora.
    """

    def complete_once(self, req: ChatRequest) -> tuple[str, Any]:
        metadata = {"provider": "mock", "key": request_key(req)}
        prompt = req.user_prompt
        if _GENERATION_MARKER in prompt:
            return self._generation_response(req), metadata
        if _QUESTION_JUDGE_MARKER in prompt:
            return self._question_judgement(req), metadata
        if _ANSWER_JUDGE_MARKER in prompt:
            return self._answer_judgement(req), metadata
        return json.dumps({"mock_response_for": metadata["key"][:16]}), metadata

    @staticmethod
    def _rng(req: ChatRequest) -> random.Random:
        return random.Random(int(request_key(req), 16))

    @staticmethod
    def _extract_triples(prompt: str) -> list[tuple[str, str, str]]:
        triples = []
        for inner in _TRIPLE_LINE_RE.findall(prompt):
            parts = [p.strip() for p in inner.split(", ")]
            if len(parts) == 3 and all(parts):
                triples.append((parts[0], parts[1], parts[2]))
        return triples

    def _generation_response(self, req: ChatRequest) -> str:
        rng = self._rng(req)
        triples = self._extract_triples(req.user_prompt)
        if not triples:
            body = {"valid_qa_pairs": False, "number_of_qa_pairs": 0, "qa_pairs": []}
            return json.dumps(body)

        chains = []
        for first in triples:
            for second in triples:
                if first is not second and first[2] == second[0] and second[2] != first[0]:
                    chains.append((first, second))
        chains.sort()

        pairs = []
        if chains:
            want = min(len(chains), 1 + rng.randrange(3))
            for first, second in rng.sample(chains, want):
                template = rng.choice(
                    (
                        "Which entity do you reach from {s} by following {p1} and then {p2}?",
                        "Starting at {s}, what does {p1} lead to once you continue via {p2}?",
                    )
                )
                pairs.append(
                    {
                        "question": template.format(s=first[0], p1=first[1], p2=second[1]),
                        "answer": second[2],
                        "supporting_path": [
                            {"subject": t[0], "predicate": t[1], "object": t[2]}
                            for t in (first, second)
                        ],
                    }
                )
        else:
            s, p, o = rng.choice(triples)
            pairs.append(
                {
                    "question": f"What is the {p} of {s}?",
                    "answer": o,
                    "supporting_path": [{"subject": s, "predicate": p, "object": o}],
                }
            )
        body = {
            "valid_qa_pairs": True,
            "number_of_qa_pairs": len(pairs),
            "qa_pairs": pairs,
        }
        text = json.dumps(body)
        if rng.random() < 0.25:
            # some models wrap JSON in fences; exercise the fallback extractor
            text = f"```json\n{text}\n```"
        return text

    def _question_judgement(self, req: ChatRequest) -> str:
        question = _field_after(req.user_prompt, "Question: ")
        return json.dumps(
            {
                "question": question,
                "logical_structure_flag": True,
                "logical_structure_reasoning": "The question is grammatical and well formed.",
                "redundancy_flag": False,
                "redundancy_reasoning": "The question does not reveal its own answer.",
            }
        )

    def _answer_judgement(self, req: ChatRequest) -> str:
        return json.dumps(
            {
                "answer_support_flag": True,
                "answer_support_reasoning": "The supporting facts entail the answer.",
                "answer_adequacy_flag": True,
                "answer_adequacy_reasoning": "The answer directly addresses the question.",
            }
        )


def _field_after(text: str, marker: str) -> str:
    idx = text.find(marker)
    if idx < 0:
        return ""
    return text[idx + len(marker) :].split("\n", 1)[0].strip()
