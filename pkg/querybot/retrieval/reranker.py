"""Second-stage re-rankers: an HTTP scoring service and a deterministic lexical one"""
import logging
from abc import ABC, abstractmethod
from typing import List, Optional, Sequence, Tuple

import httpx

from querybot.config import EndpointConfig, RetryPolicy
from querybot.clients.http import post_json
from querybot.errors import TransportError
from querybot.retrieval.minhash import jaccard, shingles

logger = logging.getLogger(__name__)


class Reranker(ABC):
    """Scores (query, document) pairs; higher means more similar."""

    model_id: str = "reranker"

    @abstractmethod
    async def score(self, query: str, documents: Sequence[str]) -> List[float]:
        """Return one score per document, in input order"""
        pass


def levenshtein(a: str, b: str) -> int:
    """Edit distance with unit costs."""
    if len(a) < len(b):
        a, b = b, a
    previous = list(range(len(b) + 1))
    for i, ca in enumerate(a, start=1):
        current = [i]
        for j, cb in enumerate(b, start=1):
            current.append(min(
                previous[j] + 1,
                current[j - 1] + 1,
                previous[j - 1] + (ca != cb),
            ))
        previous = current
    return previous[-1]


def edit_similarity(a: str, b: str) -> float:
    a, b = a.lower().strip(), b.lower().strip()
    longest = max(len(a), len(b))
    if not longest:
        return 1.0
    return 1.0 - levenshtein(a, b) / longest


class LexicalReranker(Reranker):
    """Blend of normalized edit similarity and 3-gram shingle Jaccard."""

    model_id = "lexical"

    def __init__(self, weights: Tuple[float, float] = (0.5, 0.5)):
        self.weights = weights

    def score_one(self, query: str, document: str) -> float:
        w_edit, w_jaccard = self.weights
        return w_edit * edit_similarity(query, document) + w_jaccard * jaccard(shingles(query), shingles(document))

    async def score(self, query: str, documents: Sequence[str]) -> List[float]:
        return [self.score_one(query, d) for d in documents]


class HttpReranker(Reranker):
    """Cross-encoder style service speaking POST {endpoint}/rerank."""

    def __init__(self, endpoint: EndpointConfig, retry: Optional[RetryPolicy] = None):
        if not endpoint.endpoint:
            raise ValueError(f"reranker '{endpoint.model_id}' has no endpoint configured")
        self.endpoint = endpoint
        self.retry = retry or RetryPolicy()
        self.model_id = endpoint.model_id

    async def score(self, query: str, documents: Sequence[str]) -> List[float]:
        if not documents:
            return []
        payload = {"model": self.model_id, "query": query, "documents": list(documents)}
        url = f"{self.endpoint.endpoint.rstrip('/')}/rerank"
        async with httpx.AsyncClient(timeout=self.endpoint.timeout_s) as client:
            data, _attempts = await post_json(client, url, payload, self.endpoint.api_key(), self.retry)

        scores = [0.0] * len(documents)
        try:
            for item in data["results"]:
                scores[int(item["index"])] = float(item["relevance_score"])
        except (KeyError, IndexError, TypeError, ValueError) as exc:
            raise TransportError(f"malformed rerank response from {url}: {exc}") from exc
        return scores
