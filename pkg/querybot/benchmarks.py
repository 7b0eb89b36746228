"""
Benchmark adapters.

BIRD (a JSON list with `question`, `evidence`, `db_id`, `SQL`) and Spider
(`dev.json` with `question`, `db_id`, `query`, plus `tables.json`) both
normalize to BenchmarkItem. Spider has no evidence; the hint stays empty.
"""
import json
import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, Iterable, List, Literal, Optional

from pydantic import BaseModel, Field

from querybot.catalog.loader import SQLITE_SUFFIXES, resolve_database_file
from querybot.errors import CatalogError, MissingDatabasesError, QueryBotError

logger = logging.getLogger(__name__)

Layout = Literal["bird", "spider"]


class BenchmarkItem(BaseModel):
    model_config = {"frozen": True}

    item_id: str = Field(..., description="question_id when the file has one, else the zero-padded position")
    question: str
    evidence: str = Field("", description="BIRD external knowledge; empty for Spider")
    db_id: str
    gold_sql: str


@dataclass
class Benchmark:
    name: str
    layout: Layout
    source: Path
    items: List[BenchmarkItem] = field(default_factory=list)

    @property
    def db_ids(self) -> List[str]:
        return sorted({item.db_id for item in self.items})


def _read_list(path: Path) -> List[Dict[str, Any]]:
    try:
        data = json.loads(path.read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise QueryBotError(f"cannot read benchmark {path}: {exc}") from exc
    if not isinstance(data, list):
        raise QueryBotError(f"benchmark {path} must hold a JSON list")
    return data


def detect_layout(rows: List[Dict[str, Any]]) -> Layout:
    first = next((r for r in rows if isinstance(r, dict)), {})
    if "SQL" in first:
        return "bird"
    if "query" in first:
        return "spider"
    raise QueryBotError("benchmark rows carry neither 'SQL' (BIRD) nor 'query' (Spider)")


def _items(rows: Iterable[Dict[str, Any]], layout: Layout) -> List[BenchmarkItem]:
    sql_field = "SQL" if layout == "bird" else "query"
    items: List[BenchmarkItem] = []
    for position, row in enumerate(rows):
        if not isinstance(row, dict) or not row.get("question") or not row.get("db_id") or not row.get(sql_field):
            logger.warning(f"[Eval] Benchmark row {position} lacks question/db_id/{sql_field}, skipped")
            continue
        item_id = row.get("question_id") if layout == "bird" else None
        items.append(BenchmarkItem(
            item_id=str(item_id) if item_id is not None else f"{position:05d}",
            question=str(row["question"]).strip(),
            evidence=str(row.get("evidence") or "").strip() if layout == "bird" else "",
            db_id=str(row["db_id"]),
            gold_sql=str(row[sql_field]).strip(),
        ))
    return items


def _benchmark_file(path: Path, split: str) -> Path:
    if path.is_file():
        return path
    for name in (f"{split}.json", f"{split}_spider.json", "dev.json"):
        candidate = path / name
        if candidate.is_file():
            return candidate
    raise QueryBotError(f"no '{split}' benchmark file under {path}")


def spider_db_ids(tables_json: Path) -> List[str]:
    return sorted({str(t["db_id"]) for t in _read_list(tables_json) if isinstance(t, dict) and "db_id" in t})


def load_benchmark(path: Path | str, split: str = "dev") -> Benchmark:
    """Load a BIRD file, a Spider file, or a directory holding `<split>.json`."""
    source = _benchmark_file(Path(path), split)
    rows = _read_list(source)
    layout = detect_layout(rows)
    items = _items(rows, layout)

    if layout == "spider":
        tables = source.parent / "tables.json"
        if tables.is_file():
            known = set(spider_db_ids(tables))
            unknown = sorted({i.db_id for i in items} - known)
            if unknown:
                logger.warning(f"[Eval] {len(unknown)} db_id(s) absent from tables.json: {unknown}")

    ids = [i.item_id for i in items]
    if len(ids) != len(set(ids)):
        raise QueryBotError(f"benchmark {source} has duplicate item ids")
    logger.info(f"[Eval] Loaded {len(items)} {layout} item(s) from {source}")
    return Benchmark(name=source.stem, layout=layout, source=source, items=items)


# ── Databases ─────────────────────────────────────────────────────────────────

def discover_databases(db_root: Path | str) -> Dict[str, Path]:
    """db_id -> path for `<db_root>/<db_id>/<db_id>.sqlite` directories and loose SQLite files."""
    root = Path(db_root)
    if not root.is_dir():
        return {}
    found: Dict[str, Path] = {}
    for child in sorted(root.iterdir()):
        if child.is_dir():
            try:
                resolve_database_file(child)
            except CatalogError:
                continue
            found[child.name] = child
        elif child.suffix.lower() in SQLITE_SUFFIXES:
            found.setdefault(child.stem, child)
    return found


def check_databases(db_ids: Iterable[str], available: Iterable[str]) -> None:
    missing = sorted(set(db_ids) - set(available))
    if missing:
        raise MissingDatabasesError(missing)


def database_path(db_root: Optional[Path | str], db_id: str) -> Optional[Path]:
    if db_root is None:
        return None
    return discover_databases(db_root).get(db_id)
