import json

import pytest

from benchforge.backends import (
    DEFAULT_MAX_TOKENS,
    DEFAULT_TEMPERATURE,
    DEFAULT_TOP_P,
    ChatRequest,
    MockBackend,
    MockRule,
    OpenAICompatBackend,
    TransientBackendError,
    build_backend,
    chat,
)
from benchforge.errors import BackendError, ConfigError, ValidationError


def test_request_defaults():
    req = ChatRequest.user("m", "hello")
    assert req.temperature == DEFAULT_TEMPERATURE == 0.0
    assert req.top_p == DEFAULT_TOP_P == 0.95
    assert req.max_tokens == DEFAULT_MAX_TOKENS == 2000


def test_request_validation():
    with pytest.raises(ValidationError):
        ChatRequest.user("m", "x", temperature=-0.1).validate()
    with pytest.raises(ValidationError):
        ChatRequest.user("m", "x", max_tokens=0).validate()
    with pytest.raises(ValidationError):
        ChatRequest(model="m", messages=[]).validate()


def test_mock_rules_match_in_order():
    backend = MockBackend(
        rules=[MockRule("hello", "first"), MockRule("hell", "second")],
        default="fallback",
    )
    assert backend.complete(ChatRequest.user("m", "hello there")).content == "first"
    assert backend.complete(ChatRequest.user("m", "hellhound")).content == "second"
    assert backend.complete(ChatRequest.user("m", "unrelated")).content == "fallback"
    assert len(backend.calls) == 3


def test_mock_without_default_fails_loudly():
    backend = MockBackend(rules=[MockRule("yes", "ok")])
    with pytest.raises(BackendError):
        backend.complete(ChatRequest.user("m", "no match here"))


def test_mock_responder_takes_precedence():
    backend = MockBackend(
        rules=[MockRule(".*", "rule")],
        responder=lambda req: req.messages[-1].content.upper(),
    )
    assert backend.complete(ChatRequest.user("m", "shout")).content == "SHOUT"


def test_mock_from_file(tmp_path):
    script = tmp_path / "mock.json"
    script.write_text(
        json.dumps([{"pattern": "topic", "response": "Bridges"}, {"default": "VERDICT: PASS"}])
    )
    backend = MockBackend.from_file(script)
    assert backend.complete(ChatRequest.user("m", "give me a topic")).content == "Bridges"
    assert backend.complete(ChatRequest.user("m", "anything")).content == "VERDICT: PASS"
    with pytest.raises(ConfigError):
        MockBackend.from_file(tmp_path / "absent.json")


class FlakyBackend:
    def __init__(self, failures, response="done"):
        self.failures = failures
        self.response = response
        self.attempts = 0

    def complete(self, request):
        self.attempts += 1
        if self.attempts <= self.failures:
            raise TransientBackendError("rate limited")
        from benchforge.backends import ChatResponse

        return ChatResponse(content=self.response)


def test_chat_retries_transient_failures():
    backend = FlakyBackend(failures=2)
    response = chat(backend, ChatRequest.user("m", "x"), retries=3, backoff=0)
    assert response.content == "done"
    assert backend.attempts == 3


def test_chat_gives_up_after_retry_budget():
    backend = FlakyBackend(failures=10)
    with pytest.raises(BackendError, match="after 3 attempts"):
        chat(backend, ChatRequest.user("m", "x"), retries=2, backoff=0, stage="evaluate")
    assert backend.attempts == 3


def test_chat_does_not_retry_hard_failures():
    class Dead:
        attempts = 0

        def complete(self, request):
            self.attempts += 1
            raise BackendError("auth")

    backend = Dead()
    with pytest.raises(BackendError):
        chat(backend, ChatRequest.user("m", "x"), retries=3, backoff=0)
    assert backend.attempts == 1


def test_build_backend_specs(tmp_path):
    script = tmp_path / "mock.json"
    script.write_text(json.dumps([{"default": "hi"}]))
    mock = build_backend(f"mock:{script}")
    assert isinstance(mock, MockBackend)
    live = build_backend("openai:gpt-x@https://api.example.com/v1", auth_env="MY_KEY")
    assert isinstance(live, OpenAICompatBackend)
    assert live.model == "gpt-x"
    assert live.base_url == "https://api.example.com/v1"
    assert live.auth_env == "MY_KEY"
    with pytest.raises(ConfigError):
        build_backend("nonsense")
    with pytest.raises(ConfigError):
        build_backend("openai:model-without-url")
    with pytest.raises(ConfigError):
        build_backend("carrier-pigeon:coop")


def test_live_backend_requires_auth_env(monkeypatch):
    monkeypatch.delenv("SOME_UNSET_KEY", raising=False)
    backend = OpenAICompatBackend("m", "https://api.example.com", auth_env="SOME_UNSET_KEY")
    with pytest.raises(BackendError, match="SOME_UNSET_KEY"):
        backend.complete(ChatRequest.user("m", "x"))
