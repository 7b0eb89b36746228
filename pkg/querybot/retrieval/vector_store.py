"""Flat vector store with exhaustive cosine scan, plus a persistent embedding cache"""
import hashlib
import json
import logging
import os
import re
import tempfile
import threading
from pathlib import Path
from typing import Dict, Generic, List, Optional, Sequence, Tuple, TypeVar

import numpy as np

from querybot.clients.embedder import Embedder
from querybot.errors import EmbedderUnavailableError

logger = logging.getLogger(__name__)

T = TypeVar("T")


def text_key(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


class EmbeddingCache:
    """
    Vectors keyed by (model id, text hash).

    One JSON file per model under <cache_dir>/embeddings/. Reads are
    lock-free; writes go through a single lock and an atomic replace.
    """

    def __init__(self, cache_dir: Optional[Path | str] = None):
        self.root = Path(cache_dir) / "embeddings" if cache_dir else None
        self._vectors: Dict[str, Dict[str, List[float]]] = {}
        self._lock = threading.Lock()

    def _file(self, model_id: str) -> Optional[Path]:
        if self.root is None:
            return None
        return self.root / f"{re.sub(r'[^A-Za-z0-9_.-]+', '_', model_id)}.json"

    def _table(self, model_id: str) -> Dict[str, List[float]]:
        if model_id not in self._vectors:
            table: Dict[str, List[float]] = {}
            path = self._file(model_id)
            if path is not None and path.exists():
                try:
                    table = json.loads(path.read_text(encoding="utf-8"))
                except json.JSONDecodeError:
                    logger.warning(f"[Retrieval] Ignoring unreadable embedding cache {path}")
            self._vectors[model_id] = table
        return self._vectors[model_id]

    def get(self, model_id: str, text: str) -> Optional[List[float]]:
        return self._table(model_id).get(text_key(text))

    def put_many(self, model_id: str, items: Sequence[Tuple[str, List[float]]]) -> None:
        if not items:
            return
        with self._lock:
            table = self._table(model_id)
            for text, vector in items:
                table[text_key(text)] = list(vector)
            path = self._file(model_id)
            if path is None:
                return
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".json")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                json.dump(table, fh, sort_keys=True)
            os.replace(tmp, path)


async def embed_cached(embedder: Embedder, texts: Sequence[str], cache: EmbeddingCache) -> np.ndarray:
    """
    Embed `texts`, serving what it can from the cache.

    Raises EmbedderUnavailableError when the embedder fails and some texts
    have no cached vector.
    """
    if not texts:
        return np.empty((0, 0))
    missing = sorted({t for t in texts if cache.get(embedder.model_id, t) is None})
    if missing:
        try:
            vectors = await embedder.embed(missing)
        except Exception as exc:
            raise EmbedderUnavailableError(
                f"embedder '{embedder.model_id}' unavailable and {len(missing)} text(s) not cached: {exc}"
            ) from exc
        cache.put_many(embedder.model_id, list(zip(missing, vectors)))
    return np.array([cache.get(embedder.model_id, t) for t in texts], dtype=np.float64)


class VectorStore(Generic[T]):
    """Items with unit-normalized vectors; search is a full cosine scan."""

    def __init__(self, items: Sequence[T], vectors: np.ndarray):
        if len(items) != len(vectors):
            raise ValueError(f"{len(items)} items but {len(vectors)} vectors")
        self.items = list(items)
        self._matrix = self._normalize(np.asarray(vectors, dtype=np.float64)) if len(items) else vectors

    @staticmethod
    def _normalize(matrix: np.ndarray) -> np.ndarray:
        matrix = np.atleast_2d(matrix)
        norms = np.linalg.norm(matrix, axis=1, keepdims=True)
        norms[norms == 0] = 1.0
        return matrix / norms

    def __len__(self) -> int:
        return len(self.items)

    def similarities(self, query: np.ndarray) -> np.ndarray:
        if not self.items:
            return np.zeros(0)
        q = self._normalize(np.asarray(query, dtype=np.float64))[0]
        return self._matrix @ q

    def search(self, query: np.ndarray, top_k: int) -> List[Tuple[T, float]]:
        """Top-k (item, cosine) by descending score; ties keep insertion order."""
        scores = self.similarities(query)
        order = sorted(range(len(self.items)), key=lambda i: (-float(scores[i]), i))
        return [(self.items[i], float(scores[i])) for i in order[:top_k]]
