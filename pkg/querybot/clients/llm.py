"""
Chat-model access: request/response types, the HTTP client, and llm_complete,
which adds the response cache, retries and usage accounting on top of any client.
"""
import asyncio
import hashlib
import json
import logging
import threading
import time
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from typing import Dict, List, Optional

import httpx
from pydantic import BaseModel, Field

from querybot.clients.cache import CacheEntry, ResponseCache
from querybot.clients.http import Sleep, post_json_once, with_retries
from querybot.config import EndpointConfig, ModelPrice, RetryPolicy
from querybot.errors import TransportError

logger = logging.getLogger(__name__)


class ChatRequest(BaseModel):
    model_config = {"frozen": True}

    model_id: str
    system: str = ""
    user: str
    temperature: float = 0.0
    max_tokens: int = 1024

    @property
    def prompt_text(self) -> str:
        return f"{self.system}\n\n{self.user}" if self.system else self.user

    def prompt_hash(self) -> str:
        return hashlib.sha256(self.prompt_text.encode("utf-8")).hexdigest()

    def cache_key(self) -> str:
        canonical = json.dumps(self.model_dump(), sort_keys=True, ensure_ascii=False)
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


class ChatResponse(BaseModel):
    text: str
    model_id: str
    prompt_tokens: int = 0
    completion_tokens: int = 0
    latency_s: float = Field(0.0, description="Wall time of the call that produced it")
    cached: bool = False
    attempts: int = Field(1, description="Calls made to obtain it; 0 when served from cache")


class LlmClient(ABC):
    """One chat-completion backend."""

    model_id: str = "llm"

    @abstractmethod
    async def complete(self, request: ChatRequest) -> ChatResponse:
        """Single attempt; raise TransportError on failure"""
        pass


class HttpLlmClient(LlmClient):
    """OpenAI-compatible POST {endpoint}/chat/completions."""

    def __init__(self, endpoint: EndpointConfig):
        if not endpoint.endpoint:
            raise ValueError(f"model '{endpoint.model_id}' has no endpoint configured")
        self.endpoint = endpoint
        self.model_id = endpoint.model_id

    async def complete(self, request: ChatRequest) -> ChatResponse:
        messages = []
        if request.system:
            messages.append({"role": "system", "content": request.system})
        messages.append({"role": "user", "content": request.user})
        payload = {
            "model": request.model_id,
            "messages": messages,
            "temperature": request.temperature,
            "max_tokens": request.max_tokens,
        }
        url = f"{self.endpoint.endpoint.rstrip('/')}/chat/completions"
        start = time.perf_counter()
        async with httpx.AsyncClient(timeout=self.endpoint.timeout_s) as client:
            data = await post_json_once(client, url, payload, self.endpoint.api_key())
        try:
            text = data["choices"][0]["message"]["content"] or ""
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed chat response from {url}: {exc}", retryable=False) from exc
        usage = data.get("usage") or {}
        return ChatResponse(
            text=text,
            model_id=request.model_id,
            prompt_tokens=int(usage.get("prompt_tokens", 0)),
            completion_tokens=int(usage.get("completion_tokens", 0)),
            latency_s=time.perf_counter() - start,
        )


# ── Usage accounting ──────────────────────────────────────────────────────────

@dataclass
class UsageRecord:
    stage: str
    model_id: str
    prompt_tokens: int
    completion_tokens: int
    latency_s: float
    cached: bool


@dataclass
class UsageLedger:
    """Every model response a run consumed, cached or not."""
    records: List[UsageRecord] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def record(self, stage: str, response: ChatResponse) -> None:
        with self._lock:
            self.records.append(UsageRecord(
                stage=stage,
                model_id=response.model_id,
                prompt_tokens=response.prompt_tokens,
                completion_tokens=response.completion_tokens,
                latency_s=response.latency_s,
                cached=response.cached,
            ))

    def extend(self, other: "UsageLedger") -> None:
        with self._lock:
            self.records.extend(other.records)

    @property
    def prompt_tokens(self) -> int:
        return sum(r.prompt_tokens for r in self.records)

    @property
    def completion_tokens(self) -> int:
        return sum(r.completion_tokens for r in self.records)

    def calls(self) -> int:
        return len(self.records)

    def cost(self, prices: Dict[str, ModelPrice]) -> Optional[float]:
        """USD over all records; None when any model has no price."""
        total = 0.0
        for r in self.records:
            price = prices.get(r.model_id)
            if price is None:
                return None
            total += r.prompt_tokens / 1000 * price.prompt_per_1k + r.completion_tokens / 1000 * price.completion_per_1k
        return total

    def unpriced_models(self, prices: Dict[str, ModelPrice]) -> List[str]:
        return sorted({r.model_id for r in self.records if r.model_id not in prices})

    def latency_by_stage(self) -> Dict[str, float]:
        out: Dict[str, float] = {}
        for r in self.records:
            if not r.cached:
                out[r.stage] = out.get(r.stage, 0.0) + r.latency_s
        return dict(sorted(out.items()))

    def summary(self, prices: Dict[str, ModelPrice]) -> Dict[str, object]:
        cost = self.cost(prices)
        return {
            "calls": self.calls(),
            "prompt_tokens": self.prompt_tokens,
            "completion_tokens": self.completion_tokens,
            "cost_usd": round(cost, 6) if cost is not None else None,
            "cost_status": "known" if cost is not None else "unknown",
            "unpriced_models": self.unpriced_models(prices),
        }


# ── Entry point ───────────────────────────────────────────────────────────────

async def llm_complete(
    request: ChatRequest,
    client: LlmClient,
    cache: Optional[ResponseCache] = None,
    policy: Optional[RetryPolicy] = None,
    ledger: Optional[UsageLedger] = None,
    stage: str = "llm",
    sleep: Sleep = asyncio.sleep,
) -> ChatResponse:
    """
    Cache first; on a miss call the client with bounded exponential backoff,
    cache the response and record its token usage.
    """
    key = request.cache_key()
    if cache is not None:
        entry = cache.get(key)
        if entry is not None:
            response = ChatResponse.model_validate_json(entry.payload).model_copy(update={"cached": True, "attempts": 0})
            logger.debug(f"[LLM] {stage}: cache hit {key[:12]}")
            if ledger is not None:
                ledger.record(stage, response)
            return response

    policy = policy or RetryPolicy()
    response, attempts = await with_retries(
        lambda: client.complete(request), policy, f"{stage} ({request.model_id})", sleep
    )
    response = response.model_copy(update={"attempts": len(attempts)})
    logger.info(f"[LLM] {stage}: {request.model_id} answered after {len(attempts)} attempt(s)")

    if cache is not None:
        cache.put(CacheEntry(key=key, payload=response.model_dump_json(), model_id=request.model_id))
    if ledger is not None:
        ledger.record(stage, response)
    return response
