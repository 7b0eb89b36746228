"""Embedding clients: OpenAI-compatible HTTP and a deterministic offline hasher"""
import hashlib
import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence

import httpx
import numpy as np

from querybot.config import EndpointConfig, RetryPolicy
from querybot.clients.http import post_json
from querybot.errors import TransportError
from querybot.retrieval.minhash import shingles

logger = logging.getLogger(__name__)


class Embedder(ABC):
    """Maps texts to fixed-dimension real vectors."""

    model_id: str = "embedder"

    @abstractmethod
    async def embed(self, texts: Sequence[str]) -> List[List[float]]:
        """One vector per text, same dimension for every text"""
        pass


class HashingEmbedder(Embedder):
    """
    Character-trigram feature hashing into `dim` buckets, L2-normalized.

    Identical texts map to identical vectors, so cosine(text, text) = 1.
    """

    def __init__(self, dim: int = 256):
        if dim < 1:
            raise ValueError("dim must be positive")
        self.dim = dim
        self.model_id = f"hashing-{dim}"

    def vector(self, text: str) -> np.ndarray:
        vec = np.zeros(self.dim, dtype=np.float64)
        for gram in shingles(text):
            digest = hashlib.blake2b(gram.encode("utf-8"), digest_size=8).digest()
            bucket = int.from_bytes(digest[:4], "little") % self.dim
            sign = 1.0 if digest[4] & 1 else -1.0
            vec[bucket] += sign
        norm = np.linalg.norm(vec)
        return vec / norm if norm else vec

    async def embed(self, texts: Sequence[str]) -> List[List[float]]:
        return [self.vector(t).tolist() for t in texts]


class HttpEmbedder(Embedder):
    """POST {endpoint}/embeddings with {"model", "input": [...]}."""

    def __init__(self, endpoint: EndpointConfig, retry: Optional[RetryPolicy] = None):
        if not endpoint.endpoint:
            raise ValueError(f"embedder '{endpoint.model_id}' has no endpoint configured")
        self.endpoint = endpoint
        self.retry = retry or RetryPolicy()
        self.model_id = endpoint.model_id

    async def embed(self, texts: Sequence[str]) -> List[List[float]]:
        if not texts:
            return []
        url = f"{self.endpoint.endpoint.rstrip('/')}/embeddings"
        payload = {"model": self.model_id, "input": list(texts)}
        async with httpx.AsyncClient(timeout=self.endpoint.timeout_s) as client:
            data, _attempts = await post_json(client, url, payload, self.endpoint.api_key(), self.retry)
        try:
            rows = sorted(data["data"], key=lambda d: d.get("index", 0))
            vectors = [[float(x) for x in row["embedding"]] for row in rows]
        except (KeyError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed embeddings response from {url}: {exc}", retryable=False) from exc
        if len(vectors) != len(texts) or len({len(v) for v in vectors}) > 1:
            raise TransportError(f"embeddings response from {url} has inconsistent shape", retryable=False)
        return vectors
