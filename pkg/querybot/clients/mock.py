"""
Offline model clients.

A transcript is a JSON document:

    {"rules": [
        {"match": "regex over the prompt", "responses": ["first", "second"]},
        {"prompt_hash": "<sha256 of the prompt text>", "responses": ["..."]}
    ]}

Rules are tried in order; the first that matches answers. Each rule walks its
own responses in order and repeats the last one once they run out. Inside a
`transcript_scope(key)` block the walk is private to that key, so concurrent
evaluation items each start from a rule's first response.
"""
import json
import logging
import re
from contextlib import contextmanager
from contextvars import ContextVar
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterator, List, Optional, Sequence

from querybot.clients.llm import ChatRequest, ChatResponse, LlmClient
from querybot.errors import ConfigError, TransportError

logger = logging.getLogger(__name__)

_SCOPE: ContextVar[str] = ContextVar("transcript_scope", default="")


@contextmanager
def transcript_scope(key: str) -> Iterator[None]:
    """Give the current task its own transcript rule counters."""
    token = _SCOPE.set(key)
    try:
        yield
    finally:
        _SCOPE.reset(token)


def count_tokens(text: str) -> int:
    """Whitespace token count used for mock usage accounting."""
    return len(text.split())


def mock_response(request: ChatRequest, text: str, model_id: Optional[str] = None) -> ChatResponse:
    return ChatResponse(
        text=text,
        model_id=model_id or request.model_id,
        prompt_tokens=count_tokens(request.prompt_text),
        completion_tokens=count_tokens(text),
    )


@dataclass
class TranscriptRule:
    responses: List[str]
    pattern: Optional[re.Pattern] = None
    prompt_hash: Optional[str] = None
    served: Dict[str, int] = field(default_factory=dict)

    def matches(self, request: ChatRequest) -> bool:
        if self.prompt_hash is not None:
            return request.prompt_hash() == self.prompt_hash
        return bool(self.pattern and self.pattern.search(request.prompt_text))

    def next_response(self, scope: str = "") -> str:
        count = self.served.get(scope, 0)
        self.served[scope] = count + 1
        return self.responses[min(count, len(self.responses) - 1)]


class TranscriptLlmClient(LlmClient):
    """Answers from scripted rules; unmatched prompts are a hard error."""

    model_id = "mock"

    def __init__(self, rules: Sequence[TranscriptRule]):
        self.rules = list(rules)
        self.calls: List[ChatRequest] = []

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> "TranscriptLlmClient":
        rules: List[TranscriptRule] = []
        for i, raw in enumerate(data.get("rules", [])):
            responses = raw.get("responses")
            if responses is None and "response" in raw:
                responses = [raw["response"]]
            if not responses or not all(isinstance(r, str) for r in responses):
                raise ConfigError(f"transcript rule {i}: 'responses' must be a non-empty list of strings")
            if "prompt_hash" in raw:
                rules.append(TranscriptRule(responses=list(responses), prompt_hash=str(raw["prompt_hash"])))
            elif "match" in raw:
                try:
                    pattern = re.compile(raw["match"], re.DOTALL)
                except re.error as exc:
                    raise ConfigError(f"transcript rule {i}: bad regex {raw['match']!r}: {exc}") from exc
                rules.append(TranscriptRule(responses=list(responses), pattern=pattern))
            else:
                raise ConfigError(f"transcript rule {i}: needs 'match' or 'prompt_hash'")
        return cls(rules)

    @classmethod
    def from_file(cls, path: Path | str) -> "TranscriptLlmClient":
        try:
            data = json.loads(Path(path).read_text(encoding="utf-8"))
        except FileNotFoundError as exc:
            raise ConfigError(f"mock transcript not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"mock transcript {path} is not valid JSON: {exc}") from exc
        return cls.from_dict(data)

    async def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls.append(request)
        for rule in self.rules:
            if rule.matches(request):
                return mock_response(request, rule.next_response(_SCOPE.get()))
        raise TransportError(
            f"no transcript rule matches prompt {request.prompt_hash()[:12]}",
            retryable=False,
        )


class ScriptedLlmClient(LlmClient):
    """Returns the given responses in order, repeating the last."""

    model_id = "mock"

    def __init__(self, responses: Sequence[str], failures: int = 0):
        if not responses:
            raise ValueError("ScriptedLlmClient needs at least one response")
        self.responses = list(responses)
        self.failures = failures
        self.calls: List[ChatRequest] = []
        self._served = 0

    async def complete(self, request: ChatRequest) -> ChatResponse:
        self.calls.append(request)
        if self.failures > 0:
            self.failures -= 1
            raise TransportError("scripted transient failure")
        text = self.responses[min(self._served, len(self.responses) - 1)]
        self._served += 1
        return mock_response(request, text)


class UnconfiguredLlmClient(LlmClient):
    """Stands in for a stage with neither endpoint nor transcript."""

    def __init__(self, stage: str, model_id: str):
        self.stage = stage
        self.model_id = model_id

    async def complete(self, request: ChatRequest) -> ChatResponse:
        raise ConfigError(
            f"{self.stage}: model '{self.model_id}' has no endpoint; set {self.stage}.endpoint or use --mock"
        )
