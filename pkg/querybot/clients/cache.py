"""Request/response cache for model calls, keyed by (model id, request hash)"""
import json
import logging
import os
import tempfile
import threading
from datetime import datetime, timezone
from pathlib import Path
from typing import Dict, Optional

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)


class CacheEntry(BaseModel):
    key: str = Field(..., description="sha256 of (model id, request payload)")
    payload: str = Field(..., description="Serialized response")
    created_at: str = Field(default_factory=lambda: datetime.now(timezone.utc).isoformat())
    model_id: str


class ResponseCache:
    """
    File-backed cache, one JSON file per entry under <cache_dir>/responses/.

    With no directory the cache lives in memory only. Reads need no lock;
    writes are serialized and land atomically.
    """

    def __init__(self, cache_dir: Optional[Path | str] = None, namespace: str = "responses"):
        self.root = Path(cache_dir) / namespace if cache_dir else None
        self._memory: Dict[str, CacheEntry] = {}
        self._lock = threading.Lock()
        self.hits = 0
        self.misses = 0

    def _path(self, key: str) -> Path:
        return self.root / key[:2] / f"{key}.json"

    def get(self, key: str) -> Optional[CacheEntry]:
        entry = self._memory.get(key)
        if entry is None and self.root is not None:
            path = self._path(key)
            if path.exists():
                try:
                    entry = CacheEntry.model_validate_json(path.read_text(encoding="utf-8"))
                    self._memory[key] = entry
                except ValueError as exc:
                    logger.warning(f"[LLM] Ignoring corrupt cache entry {path.name}: {exc}")
        if entry is None:
            self.misses += 1
        else:
            self.hits += 1
        return entry

    def put(self, entry: CacheEntry) -> None:
        with self._lock:
            self._memory[entry.key] = entry
            if self.root is None:
                return
            path = self._path(entry.key)
            path.parent.mkdir(parents=True, exist_ok=True)
            fd, tmp = tempfile.mkstemp(dir=path.parent, suffix=".tmp")
            with os.fdopen(fd, "w", encoding="utf-8") as fh:
                fh.write(entry.model_dump_json(indent=2))
            os.replace(tmp, path)

    def __contains__(self, key: str) -> bool:
        return key in self._memory or (self.root is not None and self._path(key).exists())

    def stats(self) -> Dict[str, int]:
        return {"hits": self.hits, "misses": self.misses}
