"""Chat backends: a live chat-completions client and a deterministic mock.

Every LLM touchpoint in the pipeline (plan proposal, paraphrasing, judging,
target-model evaluation) goes through the same small interface, so any stage
can run fully offline against a scripted mock.
"""

from __future__ import annotations

import json
import os
import re
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Protocol

from .errors import BackendError, ConfigError, ValidationError

DEFAULT_TEMPERATURE = 0.0
DEFAULT_TOP_P = 0.95
DEFAULT_MAX_TOKENS = 2000


@dataclass
class ChatMessage:
    role: str
    content: str


@dataclass
class ChatRequest:
    model: str
    messages: list[ChatMessage]
    temperature: float = DEFAULT_TEMPERATURE
    top_p: float = DEFAULT_TOP_P
    max_tokens: int = DEFAULT_MAX_TOKENS

    def validate(self) -> None:
        if self.temperature < 0:
            raise ValidationError(f"temperature must be >= 0, got {self.temperature}")
        if self.max_tokens <= 0:
            raise ValidationError(f"max_tokens must be > 0, got {self.max_tokens}")
        if not self.messages:
            raise ValidationError("chat request has no messages")

    @classmethod
    def user(cls, model: str, content: str, **kwargs) -> "ChatRequest":
        return cls(model=model, messages=[ChatMessage("user", content)], **kwargs)


@dataclass
class ChatResponse:
    content: str
    finish_reason: str = "stop"
    prompt_tokens: int = 0
    completion_tokens: int = 0


class ChatBackend(Protocol):
    def complete(self, request: ChatRequest) -> ChatResponse: ...


@dataclass
class MockRule:
    pattern: str  # regex searched against the last message content
    response: str


@dataclass
class MockBackend:
    """Scripted stand-in for a chat model.

    Matches the last message content against rules in order and returns the
    first hit; responses may also be produced by a callable for tests that
    need request-dependent replies.
    """

    rules: list[MockRule] = field(default_factory=list)
    default: str | None = None
    responder: Callable[[ChatRequest], str | None] | None = None
    calls: list[ChatRequest] = field(default_factory=list)

    def complete(self, request: ChatRequest) -> ChatResponse:
        request.validate()
        self.calls.append(request)
        content = request.messages[-1].content
        if self.responder is not None:
            reply = self.responder(request)
            if reply is not None:
                return ChatResponse(content=reply)
        for rule in self.rules:
            if re.search(rule.pattern, content, flags=re.IGNORECASE | re.DOTALL):
                return ChatResponse(content=rule.response)
        if self.default is not None:
            return ChatResponse(content=self.default)
        raise BackendError(f"mock backend has no rule matching: {content[:120]!r}")

    @classmethod
    def from_file(cls, path: str | Path) -> "MockBackend":
        """Load a mock script: JSON list of {pattern, response}, optional
        trailing {default}. Fails loudly on malformed scripts."""
        try:
            raw = json.loads(Path(path).read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot load mock script {path}: {exc}") from exc
        rules, default = [], None
        for entry in raw:
            if "default" in entry:
                default = entry["default"]
            else:
                rules.append(MockRule(entry["pattern"], entry["response"]))
        return cls(rules=rules, default=default)


class OpenAICompatBackend:
    """Client for the widely used chat-completions wire format.

    Auth comes from an environment variable named in the run config; the
    token never appears in config values.
    """

    def __init__(
        self,
        model: str,
        base_url: str,
        auth_env: str = "BENCHFORGE_API_KEY",
        timeout: float = 60.0,
    ):
        self.model = model
        self.base_url = base_url.rstrip("/")
        self.auth_env = auth_env
        self.timeout = timeout

    def complete(self, request: ChatRequest) -> ChatResponse:
        import httpx

        request.validate()
        token = os.environ.get(self.auth_env)
        if not token:
            raise BackendError(f"auth environment variable {self.auth_env} is not set")
        payload = {
            "model": request.model or self.model,
            "messages": [{"role": m.role, "content": m.content} for m in request.messages],
            "temperature": request.temperature,
            "top_p": request.top_p,
            "max_tokens": request.max_tokens,
        }
        try:
            resp = httpx.post(
                f"{self.base_url}/chat/completions",
                json=payload,
                headers={"Authorization": f"Bearer {token}"},
                timeout=self.timeout,
            )
        except httpx.TimeoutException as exc:
            raise BackendError(f"chat request timed out after {self.timeout}s") from exc
        except httpx.HTTPError as exc:
            raise BackendError(f"chat transport failure: {exc}") from exc
        if resp.status_code in (401, 403):
            raise BackendError(f"authentication failed ({resp.status_code})")
        if resp.status_code == 429:
            raise TransientBackendError("rate limited")
        if resp.status_code >= 500:
            raise TransientBackendError(f"server error {resp.status_code}")
        if resp.status_code != 200:
            raise BackendError(f"chat request failed: {resp.status_code} {resp.text[:200]}")
        body = resp.json()
        choice = body["choices"][0]
        usage = body.get("usage", {})
        return ChatResponse(
            content=choice["message"]["content"],
            finish_reason=choice.get("finish_reason", "stop"),
            prompt_tokens=usage.get("prompt_tokens", 0),
            completion_tokens=usage.get("completion_tokens", 0),
        )


class TransientBackendError(BackendError):
    """Retryable backend failure (rate limit, 5xx)."""


def chat(
    backend: ChatBackend,
    request: ChatRequest,
    retries: int = 3,
    backoff: float = 1.0,
    stage: str = "",
) -> ChatResponse:
    """Send one request with exponential backoff on transient failures."""
    request.validate()
    last: Exception | None = None
    for attempt in range(retries + 1):
        try:
            return backend.complete(request)
        except TransientBackendError as exc:
            last = exc
            if attempt < retries:
                time.sleep(backoff * (2**attempt))
    where = f" during {stage}" if stage else ""
    raise BackendError(f"backend failed after {retries + 1} attempts{where}: {last}")


def build_backend(spec: str, auth_env: str = "BENCHFORGE_API_KEY") -> ChatBackend:
    """Build a backend from its config string.

    Formats: "mock:<script path>" or "openai:<model>@<base url>".
    """
    scheme, sep, rest = spec.partition(":")
    if not sep:
        raise ConfigError(f"malformed backend spec {spec!r}")
    if scheme == "mock":
        return MockBackend.from_file(rest)
    if scheme == "openai":
        model, at, base_url = rest.partition("@")
        if not at:
            raise ConfigError(f"openai backend spec needs '<model>@<base url>', got {rest!r}")
        return OpenAICompatBackend(model=model, base_url=base_url, auth_env=auth_env)
    raise ConfigError(f"unknown backend scheme {scheme!r} in {spec!r}")
