"""Build every client a run needs from its PipelineConfig"""
import hashlib
import logging
import re
from pathlib import Path
from dataclasses import dataclass, field
from typing import Optional

from querybot.config import EndpointConfig, PipelineConfig
from querybot.clients.cache import ResponseCache
from querybot.clients.embedder import Embedder, HashingEmbedder, HttpEmbedder
from querybot.clients.llm import HttpLlmClient, LlmClient, UsageLedger
from querybot.clients.mock import TranscriptLlmClient, UnconfiguredLlmClient
from querybot.retrieval.reranker import HttpReranker, LexicalReranker, Reranker
from querybot.retrieval.vector_store import EmbeddingCache

logger = logging.getLogger(__name__)


@dataclass
class Clients:
    uqu: LlmClient
    generation: LlmClient
    revision: LlmClient
    judge: LlmClient
    embedder: Embedder
    reranker: Reranker
    cache: Optional[ResponseCache] = None
    embedding_cache: EmbeddingCache = field(default_factory=EmbeddingCache)
    ledger: UsageLedger = field(default_factory=UsageLedger)


def _llm(stage: str, endpoint: EndpointConfig, mock: Optional[TranscriptLlmClient]) -> LlmClient:
    if mock is not None:
        return mock
    if endpoint.endpoint:
        return HttpLlmClient(endpoint)
    return UnconfiguredLlmClient(stage, endpoint.model_id)


def make_embedder(config: PipelineConfig) -> Embedder:
    endpoint = config.embedder
    if endpoint.endpoint:
        return HttpEmbedder(endpoint, config.retry)
    match = re.fullmatch(r"hashing-(\d+)", endpoint.model_id)
    return HashingEmbedder(int(match.group(1)) if match else 256)


def make_reranker(config: PipelineConfig) -> Reranker:
    if config.reranker.endpoint:
        return HttpReranker(config.reranker, config.retry)
    return LexicalReranker(tuple(config.rerank_weights))


def transcript_digest(path: Path | str) -> str:
    """Content hash of a transcript; cached mock responses are namespaced by it."""
    return hashlib.sha256(Path(path).read_bytes()).hexdigest()


def build_clients(config: PipelineConfig, use_cache: bool = True) -> Clients:
    mock = TranscriptLlmClient.from_file(config.mock_transcript) if config.mock_transcript else None
    namespace = "responses"
    if mock is not None:
        logger.info(f"[LLM] Using mock transcript {config.mock_transcript} ({len(mock.rules)} rules)")
        namespace = f"responses-mock-{transcript_digest(config.mock_transcript)[:12]}"
    return Clients(
        uqu=_llm("uqu", config.uqu, mock),
        generation=_llm("generation", config.generation, mock),
        revision=_llm("revision", config.revision, mock),
        judge=_llm("judge", config.judge, mock),
        embedder=make_embedder(config),
        reranker=make_reranker(config),
        cache=ResponseCache(config.cache_path, namespace) if use_cache else ResponseCache(),
        embedding_cache=EmbeddingCache(config.cache_path if use_cache else None),
    )
