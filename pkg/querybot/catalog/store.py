"""
Persist catalogs and their value indexes so `index` runs once per database.

Each artifact is one .npz file under <cache_dir>/catalogs/, keyed by
(db file hash, seed, num_permutations, value cap, format version). A small
manifest maps db_id -> latest artifact so later commands can find it.
"""
import hashlib
import json
import logging
import os
import tempfile
import threading
from pathlib import Path
from typing import Dict, Optional, Tuple

import numpy as np

from querybot.catalog.models import DatabaseCatalog
from querybot.retrieval.minhash import MinHashIndex

logger = logging.getLogger(__name__)

FORMAT_VERSION = 1
MANIFEST = "manifest.json"


def file_sha256(path: Path | str, chunk_size: int = 1 << 20) -> str:
    digest = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(chunk_size), b""):
            digest.update(chunk)
    return digest.hexdigest()


def artifact_key(db_hash: str, seed: int, num_permutations: int, max_values: int, include_views: bool = False) -> str:
    raw = f"v{FORMAT_VERSION}|{db_hash}|{seed}|{num_permutations}|{max_values}|{int(include_views)}"
    return hashlib.sha256(raw.encode()).hexdigest()


class CatalogStore:
    """File-backed store of (catalog, index) artifacts."""

    def __init__(self, cache_dir: Path | str):
        self.root = Path(cache_dir) / "catalogs"
        self.root.mkdir(parents=True, exist_ok=True)
        self._lock = threading.Lock()

    def _path(self, db_id: str, key: str) -> Path:
        return self.root / f"{db_id}-{key[:16]}.npz"

    def has(self, db_id: str, key: str) -> bool:
        return self._path(db_id, key).exists()

    def save(self, catalog: DatabaseCatalog, index: MinHashIndex, key: str) -> Path:
        path = self._path(catalog.db_id, key)
        meta = {
            "format_version": FORMAT_VERSION,
            "key": key,
            "num_permutations": index.num_permutations,
            "seed": index.seed,
        }
        with self._lock:
            fd, tmp = tempfile.mkstemp(dir=self.root, suffix=".npz")
            os.close(fd)
            with open(tmp, "wb") as fh:
                np.savez_compressed(
                    fh,
                    meta=np.array(json.dumps(meta)),
                    catalog=np.array(catalog.model_dump_json()),
                    entries=np.array(index.entries_json()),
                    signatures=index.signatures,
                )
            os.replace(tmp, path)
            manifest = self.manifest()
            manifest[catalog.db_id] = {"key": key, "file": path.name, "db_path": catalog.db_path}
            (self.root / MANIFEST).write_text(json.dumps(manifest, indent=2, sort_keys=True), encoding="utf-8")
        logger.info(f"[Index] Saved '{catalog.db_id}' -> {path}")
        return path

    def load(self, db_id: str, key: str) -> Optional[Tuple[DatabaseCatalog, MinHashIndex]]:
        path = self._path(db_id, key)
        if not path.exists():
            return None
        return self._load_file(path)

    def load_latest(self, db_id: str) -> Optional[Tuple[DatabaseCatalog, MinHashIndex]]:
        record = self.manifest().get(db_id)
        if not record:
            return None
        path = self.root / record["file"]
        return self._load_file(path) if path.exists() else None

    def _load_file(self, path: Path) -> Optional[Tuple[DatabaseCatalog, MinHashIndex]]:
        try:
            with np.load(path, allow_pickle=False) as data:
                meta = json.loads(str(data["meta"]))
                if meta.get("format_version") != FORMAT_VERSION:
                    logger.warning(f"[Index] {path.name}: format {meta.get('format_version')} ignored")
                    return None
                catalog = DatabaseCatalog.model_validate_json(str(data["catalog"]))
                index = MinHashIndex.from_entries_json(
                    str(data["entries"]), data["signatures"], meta["num_permutations"], meta["seed"]
                )
        except Exception as exc:
            logger.warning(f"[Index] Could not read {path}: {exc}")
            return None
        return catalog.with_index(index), index

    def manifest(self) -> Dict[str, Dict[str, str]]:
        path = self.root / MANIFEST
        if not path.exists():
            return {}
        try:
            return json.loads(path.read_text(encoding="utf-8"))
        except json.JSONDecodeError:
            return {}

    def known_ids(self) -> list[str]:
        return sorted(self.manifest())
