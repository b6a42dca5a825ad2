"""Chat-completion gateway: one interface over a remote OpenAI-compatible
endpoint and a deterministic offline mock, with retries, a concurrency bound,
and a content-addressed response cache."""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import httpx

from .errors import (
    AuthMissing,
    InvalidRequest,
    MalformedResponse,
    RateLimitedExhausted,
    TransportError,
    UnrecognizedPromptShape,
)
from .prompting import SCORE_CONCLUSION_PHRASE

ROLES = ("system", "user", "assistant")

DEFAULT_MODEL = "gpt-3.5-turbo"
DEFAULT_API_KEY_ENV = "OPENAI_API_KEY"

_RETRIABLE_STATUS = (429, 500, 502, 503, 504)


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str


@dataclass(frozen=True)
class ChatRequest:
    """A single-turn (or multi-turn) completion request.

    ``sample_index`` distinguishes repeated draws of the same prompt: it is
    part of the request identity (and so of the cache key) but is never sent
    over the wire. Without it, a replayable cache would collapse the five
    independent scoring samples per paragraph into one.
    """

    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float
    max_tokens: int
    sample_index: int = 0

    def validate(self) -> None:
        if not self.messages:
            raise InvalidRequest("request has no messages")
        if not any(m.role == "user" for m in self.messages):
            raise InvalidRequest("request has no user message")
        for m in self.messages:
            if m.role not in ROLES:
                raise InvalidRequest(f"unknown role '{m.role}'")
            if not m.content:
                raise InvalidRequest("message content is empty")
        if self.temperature < 0:
            raise InvalidRequest("temperature must be >= 0")
        if self.max_tokens < 1:
            raise InvalidRequest("max_tokens must be positive")

    def user_text(self) -> str:
        return "\n".join(m.content for m in self.messages if m.role == "user")


@dataclass(frozen=True)
class ChatResponse:
    content: str
    finish_reason: str
    prompt_tokens: int
    completion_tokens: int
    backend: str
    cached: bool = False


@dataclass(frozen=True)
class GatewayConfig:
    backend: str = "mock"
    base_url: str = "https://api.openai.com/v1"
    model: str = DEFAULT_MODEL
    temperature: float = 1.0
    max_tokens: int = 1024
    max_retries: int = 3
    backoff_base: float = 1.0
    backoff_factor: float = 2.0
    backoff_max: float = 30.0
    max_in_flight: int = 4
    timeout: float = 60.0
    cache_dir: Path | None = None
    api_key_env: str = DEFAULT_API_KEY_ENV

    def __post_init__(self) -> None:
        if self.backend not in ("mock", "remote"):
            raise InvalidRequest(f"unknown backend '{self.backend}'")
        if self.max_in_flight < 1:
            raise InvalidRequest("max_in_flight must be >= 1")
        if self.max_retries < 0:
            raise InvalidRequest("max_retries must be >= 0")


def request_hash(request: ChatRequest) -> str:
    """Stable cache key over every field that determines the response."""
    canonical = json.dumps(
        {
            "model": request.model,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
            "messages": [[m.role, m.content] for m in request.messages],
            "sample_index": request.sample_index,
        },
        ensure_ascii=True,
        sort_keys=True,
        separators=(",", ":"),
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def _stable_u64(*parts: str) -> int:
    digest = hashlib.sha256("\x1f".join(parts).encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "big")


# --- deterministic mock backend --------------------------------------------

MOCK_TASK_POOL = (
    "Text Classification",
    "Sentiment Analysis",
    "Named Entity Recognition",
    "Question Answering",
    "Topic Classification",
    "Intent Detection",
    "Paraphrase Detection",
    "Textual Entailment",
)

_MOCK_LABELS = {
    "Text Classification": ("Dialogue", "Narration", "Commentary", "Description"),
    "Sentiment Analysis": ("Positive", "Negative", "Neutral"),
    "Named Entity Recognition": ("Person", "Location", "Organization"),
    "Question Answering": ("Answerable", "Unanswerable"),
    "Topic Classification": ("Daily Life", "Technology", "Nature", "Society"),
    "Intent Detection": ("Request", "Statement", "Question"),
    "Paraphrase Detection": ("Paraphrase", "Not Paraphrase"),
    "Textual Entailment": ("Entailment", "Contradiction", "Neutral"),
}

_MOCK_OPENINGS = (
    "The following passage weaves several small moments into one scene.",
    "Here is a short account that ties a few loose threads together.",
    "Consider this brief narrative assembled from scattered remarks.",
    "What follows is a little story put together from separate notes.",
)

_MOCK_CLOSINGS = (
    "Taken together, the pieces describe a single unfolding moment.",
    "Read as one, these lines sketch a coherent little episode.",
    "Together they form one continuous scene.",
    "In the end, the fragments settle into a single account.",
)

_MOCK_PLANS = (
    "1. Read the {count} given sentences and look for a shared thread.\n"
    "2. Decide that {task} suits the material best.\n"
    "3. Weave every sentence into one connected paragraph.\n"
    "4. State the task name and list its labels.",
    "1. Collect the {count} sentences and note their common setting.\n"
    "2. Pick {task} as the task the paragraph will illustrate.\n"
    "3. Compose a paragraph that uses each sentence once.\n"
    "4. Write down the task and the matching labels.",
    "1. Go through the {count} sentences one by one.\n"
    "2. Choose {task} because it fits what the sentences share.\n"
    "3. Join the sentences into a single readable paragraph.\n"
    "4. Conclude with the task name and its labels.",
)

_MOCK_ANALYSES = (
    "The paragraph reads as one connected scene and its transitions are mostly smooth.",
    "The sentences follow each other with a plausible thread, though a few jumps remain.",
    "Ideas in the paragraph connect loosely; the framing holds them together.",
    "The paragraph keeps a single narrative voice and moves topic to topic without breaking.",
)

_NUMBERED_LINE_RE = re.compile(r"^([1-9])\.\s+(.*)$", re.MULTILINE)

_GENERATION_HEADER_RES = [
    re.compile(rf"^{name}:", re.IGNORECASE | re.MULTILINE)
    for name in ("Plan", "Paragraph", "Task", "Labels")
]


def _extract_numbered_sentences(prompt: str) -> list[str]:
    found = []
    for num, text in _NUMBERED_LINE_RE.findall(prompt):
        if int(num) <= 5 and len(found) < 5:
            found.append(text.strip())
    return found


def _mock_generation_content(prompt: str, seed: int) -> str:
    task = MOCK_TASK_POOL[seed % len(MOCK_TASK_POOL)]
    sentences = _extract_numbered_sentences(prompt)
    opening = _MOCK_OPENINGS[(seed >> 3) % len(_MOCK_OPENINGS)]
    closing = _MOCK_CLOSINGS[(seed >> 5) % len(_MOCK_CLOSINGS)]
    paragraph = " ".join([opening, *sentences, closing])
    plan = _MOCK_PLANS[(seed >> 7) % len(_MOCK_PLANS)].format(
        count=len(sentences) or "given", task=task
    )
    labels = _MOCK_LABELS[task]
    if (seed >> 9) % 2 == 0:
        labels_block = "[" + "\n".join(labels) + "]"
    else:
        labels_block = "\n".join(f"{i}. {lab}" for i, lab in enumerate(labels, start=1))
    if (seed >> 10) % 2 == 0:
        return (
            f"Plan:\n{plan}\nParagraph:\n{paragraph}\n"
            f"Task:\n[{task}]\nLabels:\n{labels_block}"
        )
    return (
        f"Paragraph:\n{paragraph}\nPlan:\n{plan}\n"
        f"Task:\n[{task}]\nLabels:\n{labels_block}"
    )


def _mock_score_content(seed: int) -> str:
    score = 1 + seed % 10
    analysis = _MOCK_ANALYSES[(seed >> 4) % len(_MOCK_ANALYSES)]
    period = "." if (seed >> 8) % 2 == 0 else ""
    return f"{analysis}\nThus the coherency score is {score}{period}"


def mock_complete(request: ChatRequest) -> ChatResponse:
    """Deterministic offline completion, a pure function of request content.

    Scoring-shaped prompts (containing the score-conclusion instruction) get
    an analysis ending in a valid score line; generation-shaped prompts (the
    four-header skeleton) get a well-formed four-section output whose
    paragraph embeds the prompt's numbered sentences.
    """
    request.validate()
    prompt = request.user_text()
    seed = _stable_u64(str(request.sample_index), prompt)
    if SCORE_CONCLUSION_PHRASE in prompt:
        content = _mock_score_content(seed)
    elif all(rx.search(prompt) for rx in _GENERATION_HEADER_RES):
        content = _mock_generation_content(prompt, seed)
    else:
        raise UnrecognizedPromptShape(
            "prompt is neither generation-shaped nor scoring-shaped"
        )
    return ChatResponse(
        content=content,
        finish_reason="stop",
        prompt_tokens=len(prompt.split()),
        completion_tokens=len(content.split()),
        backend="mock",
    )


class MockBackend:
    """Callable wrapper around :func:`mock_complete` that counts invocations,
    so tests can assert cache hits made no backend call."""

    kind = "mock"

    def __init__(self) -> None:
        self.calls = 0
        self._lock = threading.Lock()

    def complete(self, request: ChatRequest) -> ChatResponse:
        with self._lock:
            self.calls += 1
        return mock_complete(request)

    def close(self) -> None:
        pass


class RemoteBackend:
    """OpenAI-compatible chat completions over HTTP with retry + backoff."""

    kind = "remote"

    def __init__(self, config: GatewayConfig, transport: httpx.BaseTransport | None = None):
        self.config = config
        self._transport = transport
        self._client: httpx.Client | None = None
        self._lock = threading.Lock()

    def _client_instance(self) -> httpx.Client:
        with self._lock:
            if self._client is None:
                self._client = httpx.Client(
                    timeout=self.config.timeout, transport=self._transport
                )
            return self._client

    def _api_key(self) -> str:
        key = os.environ.get(self.config.api_key_env, "")
        if not key:
            raise AuthMissing(self.config.api_key_env)
        return key

    def complete(self, request: ChatRequest) -> ChatResponse:
        key = self._api_key()
        url = self.config.base_url.rstrip("/") + "/chat/completions"
        body = {
            "model": request.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        headers = {"Authorization": f"Bearer {key}"}
        attempts = self.config.max_retries + 1
        last_status: int | None = None
        last_error: Exception | None = None
        for attempt in range(attempts):
            if attempt:
                delay = min(
                    self.config.backoff_base * self.config.backoff_factor ** (attempt - 1),
                    self.config.backoff_max,
                )
                time.sleep(delay)
            try:
                resp = self._client_instance().post(url, json=body, headers=headers)
            except httpx.HTTPError as exc:
                last_error, last_status = exc, None
                continue
            if resp.status_code in _RETRIABLE_STATUS:
                last_status, last_error = resp.status_code, None
                continue
            if resp.status_code != 200:
                raise TransportError(f"HTTP {resp.status_code}: {resp.text[:200]}")
            return _parse_remote_payload(resp)
        if last_status == 429:
            raise RateLimitedExhausted(f"still rate-limited after {attempts} attempts")
        raise TransportError(
            f"request failed after {attempts} attempts: "
            + (f"HTTP {last_status}" if last_status else repr(last_error))
        )

    def close(self) -> None:
        with self._lock:
            if self._client is not None:
                self._client.close()
                self._client = None


def _parse_remote_payload(resp: httpx.Response) -> ChatResponse:
    try:
        payload = resp.json()
        choice = payload["choices"][0]
        content = choice["message"]["content"]
        finish = choice.get("finish_reason", "stop")
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"unexpected response shape: {exc}") from exc
    if content is None or (not content and finish == "stop"):
        raise MalformedResponse("empty content with normal finish reason")
    usage = payload.get("usage") or {}
    return ChatResponse(
        content=content,
        finish_reason=finish,
        prompt_tokens=int(usage.get("prompt_tokens", 0)),
        completion_tokens=int(usage.get("completion_tokens", 0)),
        backend="remote",
    )


class Gateway:
    """Front door for completions: cache lookup, concurrency bound, backend call.

    Thread-safe; the semaphore caps in-flight backend calls and a lock
    serializes cache writes. Cache files are written atomically so a torn
    write can never surface as a corrupt hit.
    """

    def __init__(self, config: GatewayConfig, backend=None):
        self.config = config
        if backend is not None:
            self.backend = backend
        elif config.backend == "mock":
            self.backend = MockBackend()
        else:
            self.backend = RemoteBackend(config)
        self._inflight = threading.BoundedSemaphore(config.max_in_flight)
        self._cache_lock = threading.Lock()
        if config.cache_dir is not None:
            Path(config.cache_dir).mkdir(parents=True, exist_ok=True)

    def build_request(self, text: str, sample_index: int = 0) -> ChatRequest:
        """A single user-turn request using the configured decoding settings."""
        return ChatRequest(
            model=self.config.model,
            messages=(ChatMessage(role="user", content=text),),
            temperature=self.config.temperature,
            max_tokens=self.config.max_tokens,
            sample_index=sample_index,
        )

    def _cache_path(self, digest: str) -> Path:
        assert self.config.cache_dir is not None
        return Path(self.config.cache_dir) / f"{digest}.json"

    def _cache_get(self, digest: str) -> ChatResponse | None:
        path = self._cache_path(digest)
        try:
            record = json.loads(path.read_text(encoding="utf-8"))
            stored = record["response"]
            return ChatResponse(
                content=stored["content"],
                finish_reason=stored["finish_reason"],
                prompt_tokens=stored["prompt_tokens"],
                completion_tokens=stored["completion_tokens"],
                backend=stored["backend"],
                cached=True,
            )
        except FileNotFoundError:
            return None
        except (ValueError, KeyError, TypeError):
            return None  # unreadable entry: treat as a miss and refetch

    def _cache_put(self, digest: str, request: ChatRequest, response: ChatResponse) -> None:
        record = {
            "request": {
                "model": request.model,
                "messages": [[m.role, m.content] for m in request.messages],
                "temperature": request.temperature,
                "max_tokens": request.max_tokens,
                "sample_index": request.sample_index,
            },
            "response": {
                "content": response.content,
                "finish_reason": response.finish_reason,
                "prompt_tokens": response.prompt_tokens,
                "completion_tokens": response.completion_tokens,
                "backend": response.backend,
            },
            "timestamp": time.time(),
        }
        path = self._cache_path(digest)
        tmp = path.with_suffix(".tmp")
        with self._cache_lock:
            tmp.write_text(json.dumps(record, ensure_ascii=False), encoding="utf-8")
            tmp.replace(path)

    def complete(self, request: ChatRequest) -> ChatResponse:
        request.validate()
        digest = request_hash(request) if self.config.cache_dir is not None else None
        if digest is not None:
            hit = self._cache_get(digest)
            if hit is not None:
                return hit
        with self._inflight:
            response = self.backend.complete(request)
        if digest is not None:
            self._cache_put(digest, request, response)
        return response

    def close(self) -> None:
        self.backend.close()
