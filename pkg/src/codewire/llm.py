"""Chat-completion transport, token accounting and a scripted test double."""

from __future__ import annotations

import logging
import math
import os
import threading
import time
from dataclasses import dataclass, field
from typing import Callable, Iterable, Protocol, Sequence, Union

import httpx

from codewire.errors import ConfigError, TransportError

log = logging.getLogger(__name__)

Message = dict  # {"role": ..., "content": ...}


@dataclass(frozen=True)
class ModelConfig:
    endpoint: str = "https://api.openai.com/v1"
    model: str = "gpt-4o-mini"
    api_key_env: str = "CODEWIRE_API_KEY"
    temperature: float = 0.0
    max_tokens: int = 1024
    timeout: float = 60.0
    votes: int = 5
    max_concurrency: int = 4

    def __post_init__(self) -> None:
        if self.temperature < 0:
            raise ConfigError("temperature must be >= 0")
        if self.votes < 1:
            raise ConfigError("votes must be >= 1")
        if self.max_concurrency < 1:
            raise ConfigError("max_concurrency must be >= 1")
        if self.timeout <= 0:
            raise ConfigError("timeout must be positive")

    def api_key(self) -> str:
        key = os.environ.get(self.api_key_env)
        if not key:
            raise ConfigError(f"environment variable {self.api_key_env} is not set")
        return key


@dataclass(frozen=True)
class ChatExchange:
    messages: tuple[Message, ...]
    text: str
    tokens_in: int
    tokens_out: int
    latency_ms: float
    estimated: bool = False

    @property
    def total_tokens(self) -> int:
        return self.tokens_in + self.tokens_out


class ChatModel(Protocol):
    def complete(self, messages: Sequence[Message], *, temperature: float | None = None) -> ChatExchange: ...


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four UTF-8 bytes."""
    return math.ceil(len(text.encode("utf-8")) / 4)


def _messages_text(messages: Sequence[Message]) -> str:
    return "\n".join(str(m.get("content", "")) for m in messages)


class HttpChatModel:
    """OpenAI-compatible ``/chat/completions`` client."""

    def __init__(self, config: ModelConfig, client: httpx.Client | None = None) -> None:
        self.config = config
        self._client = client or httpx.Client(timeout=config.timeout)
        self._owns_client = client is None
        self._slots = threading.BoundedSemaphore(config.max_concurrency)

    def close(self) -> None:
        if self._owns_client:
            self._client.close()

    def __enter__(self) -> HttpChatModel:
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def complete(self, messages: Sequence[Message], *, temperature: float | None = None) -> ChatExchange:
        cfg = self.config
        headers = {"Authorization": f"Bearer {cfg.api_key()}"}
        payload = {
            "model": cfg.model,
            "messages": list(messages),
            "temperature": cfg.temperature if temperature is None else temperature,
            "max_tokens": cfg.max_tokens,
        }
        url = cfg.endpoint.rstrip("/") + "/chat/completions"
        with self._slots:
            started = time.perf_counter()
            try:
                resp = self._client.post(url, json=payload, headers=headers, timeout=cfg.timeout)
            except httpx.TimeoutException as exc:
                raise TransportError(f"request timed out after {cfg.timeout}s") from exc
            except httpx.HTTPError as exc:
                raise TransportError(f"request failed: {exc}") from exc
            latency = (time.perf_counter() - started) * 1000
        if resp.status_code >= 400:
            retryable = resp.status_code == 429 or resp.status_code >= 500
            raise TransportError(
                f"HTTP {resp.status_code}: {resp.text[:200]}", retryable=retryable, status=resp.status_code
            )
        try:
            body = resp.json()
            text = body["choices"][0]["message"]["content"] or ""
        except (ValueError, KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"unexpected response shape: {exc}", retryable=False) from exc
        usage = body.get("usage") or {}
        if "prompt_tokens" in usage and "completion_tokens" in usage:
            tokens_in, tokens_out, estimated = int(usage["prompt_tokens"]), int(usage["completion_tokens"]), False
        else:
            tokens_in, tokens_out, estimated = estimate_tokens(_messages_text(messages)), estimate_tokens(text), True
        return ChatExchange(tuple(messages), text, tokens_in, tokens_out, latency, estimated)


def complete_chat(config: ModelConfig, messages: Sequence[Message], client: httpx.Client | None = None) -> ChatExchange:
    model = HttpChatModel(config, client)
    try:
        return model.complete(messages)
    finally:
        model.close()


Reply = Union[str, Exception, Callable[[Sequence[Message]], str]]


class ScriptedModel:
    """Replays canned replies in order. Running out raises TransportError.

    A reply may also be an exception instance (raised when reached) or a
    callable receiving the messages. Token counts are the bytes/4 estimate.
    """

    def __init__(self, replies: Iterable[Reply] = (), latency_ms: float = 0.0) -> None:
        self._replies = list(replies)
        self._cursor = 0
        self._lock = threading.Lock()
        self.latency_ms = latency_ms
        self.calls: list[ChatExchange] = []

    @property
    def remaining(self) -> int:
        return len(self._replies) - self._cursor

    def complete(self, messages: Sequence[Message], *, temperature: float | None = None) -> ChatExchange:
        with self._lock:
            if self._cursor >= len(self._replies):
                raise TransportError("scripted transcript exhausted", retryable=False)
            reply = self._replies[self._cursor]
            self._cursor += 1
        if isinstance(reply, Exception):
            raise reply
        text = reply(messages) if callable(reply) else reply
        exchange = ChatExchange(
            tuple(messages), text, estimate_tokens(_messages_text(messages)), estimate_tokens(text), self.latency_ms
        )
        with self._lock:
            self.calls.append(exchange)
        return exchange


def call_with_retries(
    fn: Callable[[], ChatExchange],
    attempts: int = 3,
    base_delay: float = 0.5,
    sleep: Callable[[float], None] = time.sleep,
) -> ChatExchange:
    """Run ``fn`` up to ``attempts`` times with exponential backoff on retryable failures."""
    last: TransportError | None = None
    for attempt in range(1, attempts + 1):
        try:
            return fn()
        except TransportError as exc:
            last = exc
            exc.attempts = attempt
            if not exc.retryable or attempt == attempts:
                break
            delay = base_delay * 2 ** (attempt - 1)
            log.warning("transport error (%s); retrying in %.2fs", exc, delay)
            sleep(delay)
    assert last is not None
    raise last


@dataclass(frozen=True)
class LedgerEntry:
    purpose: str  # "decision", "completion" or "naive"
    tokens_in: int
    tokens_out: int
    ms: float
    estimated: bool = False


@dataclass
class Ledger:
    """Per-session record of every model call."""

    entries: list[LedgerEntry] = field(default_factory=list)

    def record(self, exchange: ChatExchange, purpose: str) -> LedgerEntry:
        entry = LedgerEntry(purpose, exchange.tokens_in, exchange.tokens_out, exchange.latency_ms, exchange.estimated)
        self.entries.append(entry)
        return entry

    @property
    def tokens_in(self) -> int:
        return sum(e.tokens_in for e in self.entries)

    @property
    def tokens_out(self) -> int:
        return sum(e.tokens_out for e in self.entries)

    @property
    def total_tokens(self) -> int:
        return self.tokens_in + self.tokens_out

    @property
    def ms(self) -> float:
        return sum(e.ms for e in self.entries)

    @property
    def calls(self) -> int:
        return len(self.entries)

    @property
    def estimated(self) -> bool:
        return any(e.estimated for e in self.entries)

    def count(self, purpose: str) -> int:
        return sum(1 for e in self.entries if e.purpose == purpose)
