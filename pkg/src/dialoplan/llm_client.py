"""Client for chat-completions style endpoints.

One client fronts any backend that speaks the de-facto POST
/v1/chat/completions JSON protocol. Transient failures are retried with
exponential backoff; responses can be cached in an append-only JSONL file
so whole runs replay offline and byte-identically. Tests install a mock
transport and never touch the network.
"""

from __future__ import annotations

import hashlib
import json
import os
import re
import threading
import time
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, Protocol

import requests


class TransportError(RuntimeError):
    """Retries exhausted or the backend is unreachable."""


class ConfigurationError(ValueError):
    """The request or client setup is wrong; retrying cannot help."""


class RetryableFailure(Exception):
    """Raised by transports to request a backoff-and-retry."""


@dataclass(frozen=True)
class ChatMessage:
    role: str
    content: str

    def to_json_dict(self) -> dict:
        return {"role": self.role, "content": self.content}


@dataclass(frozen=True)
class ChatRequest:
    model: str
    messages: tuple[ChatMessage, ...]
    temperature: float = 0.7
    max_tokens: int = 256
    seed: int | None = None

    def __post_init__(self) -> None:
        if not self.messages:
            raise ConfigurationError("chat request needs at least one message")


@dataclass
class TransportResult:
    text: str
    prompt_tokens: int = 0
    completion_tokens: int = 0


@dataclass
class Usage:
    requests: int = 0
    cache_hits: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0


_WS = re.compile(r"\s+")


def cache_key(req: ChatRequest) -> str:
    """Stable digest of the request identity.

    Whitespace runs inside message content are collapsed and the payload is
    serialized with sorted keys, so formatting and field order do not
    produce distinct cache entries.
    """
    canonical = {
        "model": req.model,
        "messages": [
            {"role": m.role, "content": _WS.sub(" ", m.content).strip()}
            for m in req.messages
        ],
        "temperature": format(req.temperature, ".6g"),
        "seed": req.seed,
    }
    blob = json.dumps(canonical, sort_keys=True, ensure_ascii=False)
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()


class Transport(Protocol):
    def send(self, req: ChatRequest) -> TransportResult: ...


Responder = Callable[[ChatRequest], str]


class MockTransport:
    """Deterministic in-process transport for tests and offline demos.

    Rules are (predicate, responder) pairs checked in order; the default
    responder answers anything unmatched. Every request is recorded.
    """

    def __init__(self, default: Responder | str = "OK."):
        self.rules: list[tuple[Callable[[ChatRequest], bool], Responder]] = []
        self._default: Responder = (
            (lambda _req: default) if isinstance(default, str) else default
        )
        self.requests: list[ChatRequest] = []
        self.failures: list[Exception] = []

    def add_rule(self, predicate: Callable[[ChatRequest], bool], responder: Responder | str):
        if isinstance(responder, str):
            text = responder
            responder = lambda _req: text  # noqa: E731
        self.rules.append((predicate, responder))
        return self

    def fail_next(self, exc: Exception) -> None:
        """Queue a failure to be raised before the next reply."""
        self.failures.append(exc)

    def send(self, req: ChatRequest) -> TransportResult:
        self.requests.append(req)
        if self.failures:
            raise self.failures.pop(0)
        for predicate, responder in self.rules:
            if predicate(req):
                text = responder(req)
                break
        else:
            text = self._default(req)
        prompt_tokens = sum(len(m.content.split()) for m in req.messages)
        return TransportResult(text, prompt_tokens, len(text.split()))


class HttpTransport:
    """POST /v1/chat/completions over HTTPS with bearer auth."""

    RETRYABLE_STATUS = {429, 500, 502, 503, 504}

    def __init__(
        self,
        base_url: str | None = None,
        api_key: str | None = None,
        timeout: float = 60.0,
    ):
        self.base_url = (base_url or os.environ.get("DIALOPLAN_BASE_URL", "")).rstrip("/")
        self.api_key = api_key or os.environ.get("DIALOPLAN_API_KEY", "")
        self.timeout = timeout
        if not self.base_url:
            raise ConfigurationError(
                "no endpoint configured; set DIALOPLAN_BASE_URL or pass base_url"
            )

    def send(self, req: ChatRequest) -> TransportResult:
        payload = {
            "model": req.model,
            "messages": [m.to_json_dict() for m in req.messages],
            "temperature": req.temperature,
            "max_tokens": req.max_tokens,
        }
        if req.seed is not None:
            payload["seed"] = req.seed
        headers = {"Content-Type": "application/json"}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        try:
            resp = requests.post(
                f"{self.base_url}/v1/chat/completions",
                json=payload,
                headers=headers,
                timeout=self.timeout,
            )
        except (requests.Timeout, requests.ConnectionError) as exc:
            raise RetryableFailure(str(exc)) from exc
        if resp.status_code in self.RETRYABLE_STATUS:
            raise RetryableFailure(f"HTTP {resp.status_code}")
        if resp.status_code >= 400:
            raise ConfigurationError(f"HTTP {resp.status_code}: {resp.text[:500]}")
        body = resp.json()
        usage = body.get("usage", {})
        return TransportResult(
            text=body["choices"][0]["message"]["content"],
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


class LlmClient:
    """Completion front door: caching, retries, and usage accounting."""

    def __init__(
        self,
        transport: Transport,
        cache_path: str | Path | None = None,
        cache_enabled: bool = True,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        sleep: Callable[[float], None] = time.sleep,
    ):
        self.transport = transport
        self.cache_enabled = cache_enabled and cache_path is not None
        self.cache_path = Path(cache_path) if cache_path else None
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        self._sleep = sleep
        self.usage = Usage()
        self._cache: dict[str, str] = {}
        self._lock = threading.Lock()
        if self.cache_enabled and self.cache_path and self.cache_path.exists():
            with open(self.cache_path, encoding="utf-8") as fh:
                for line in fh:
                    line = line.strip()
                    if not line:
                        continue
                    entry = json.loads(line)
                    self._cache[entry["key"]] = entry["text"]

    def complete(self, req: ChatRequest) -> str:
        key = cache_key(req) if self.cache_enabled else None
        if key is not None:
            with self._lock:
                if key in self._cache:
                    self.usage.cache_hits += 1
                    return self._cache[key]
        attempt = 0
        while True:
            try:
                result = self.transport.send(req)
                break
            except RetryableFailure as exc:
                attempt += 1
                if attempt > self.max_retries:
                    raise TransportError(
                        f"gave up after {self.max_retries} retries: {exc}"
                    ) from exc
                self._sleep(self.backoff_base * 2 ** (attempt - 1))
        with self._lock:
            self.usage.requests += 1
            self.usage.prompt_tokens += result.prompt_tokens
            self.usage.completion_tokens += result.completion_tokens
            if key is not None:
                self._cache[key] = result.text
                if self.cache_path:
                    with open(self.cache_path, "a", encoding="utf-8") as fh:
                        fh.write(json.dumps({"key": key, "text": result.text}) + "\n")
        return result.text
