"""
Ingest a SQLite database (and its BIRD description CSVs) into a DatabaseCatalog.

Databases are always opened read-only. Column values are read as a sorted
distinct prefix capped at `max_values_per_column`, so ingestion is
deterministic and idempotent.
"""
import csv
import logging
import sqlite3
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Tuple

from querybot.catalog.models import (
    ColumnKind,
    ColumnSchema,
    DatabaseCatalog,
    DescriptionEntry,
    ForeignKey,
    TableSchema,
)
from querybot.catalog.values import canonical_value
from querybot.errors import EmptyDatabaseError, UnreadableDatabaseError

logger = logging.getLogger(__name__)

DESCRIPTION_DIR = "database_description"
SQLITE_SUFFIXES = (".sqlite", ".sqlite3", ".db")


@dataclass(frozen=True)
class CatalogLimits:
    """Ingestion knobs."""
    max_values_per_column: int = 5000
    include_views: bool = False


def quote_ident(name: str) -> str:
    return '"' + name.replace('"', '""') + '"'


def column_kind(declared_type: str) -> ColumnKind:
    """Map a declared SQLite type onto text / numeric / other (affinity rules)."""
    t = (declared_type or "").upper()
    if "INT" in t:
        return "numeric"
    if any(k in t for k in ("CHAR", "CLOB", "TEXT")):
        return "text"
    if any(k in t for k in ("REAL", "FLOA", "DOUB", "NUM", "DEC")):
        return "numeric"
    return "other"


def open_readonly(db_path: Path, timeout: float = 5.0) -> sqlite3.Connection:
    """Open a SQLite file read-only; the file itself is never modified."""
    uri = f"{db_path.resolve().as_uri()}?mode=ro"
    return sqlite3.connect(uri, uri=True, timeout=timeout, check_same_thread=False)


def resolve_database_file(path: Path) -> Path:
    """Accept either a SQLite file or a BIRD/Spider database directory."""
    if path.is_file():
        return path
    if path.is_dir():
        for suffix in SQLITE_SUFFIXES:
            named = path / f"{path.name}{suffix}"
            if named.is_file():
                return named
        found = sorted(p for p in path.iterdir() if p.suffix.lower() in SQLITE_SUFFIXES and p.is_file())
        if len(found) == 1:
            return found[0]
        if found:
            raise UnreadableDatabaseError(f"{path} holds several database files: {[p.name for p in found]}")
    raise UnreadableDatabaseError(f"no SQLite database at {path}")


# ── Schema + values ───────────────────────────────────────────────────────────

def _read_values(conn: sqlite3.Connection, table: str, column: str, cap: int) -> List[str]:
    sql = (
        f"SELECT DISTINCT {quote_ident(column)} FROM {quote_ident(table)} "
        f"WHERE {quote_ident(column)} IS NOT NULL ORDER BY {quote_ident(column)} LIMIT ?"
    )
    values: List[str] = []
    seen = set()
    for (raw,) in conn.execute(sql, (cap,)):
        value = canonical_value(raw)
        if value is None or value in seen:
            continue
        seen.add(value)
        values.append(value)
    return values


def _read_table(conn: sqlite3.Connection, name: str, is_view: bool, limits: CatalogLimits) -> TableSchema:
    columns: List[ColumnSchema] = []
    for _cid, col_name, declared, _notnull, _default, pk in conn.execute(
        f"PRAGMA table_info({quote_ident(name)})"
    ):
        columns.append(ColumnSchema(
            name=col_name,
            declared_type=declared or "",
            kind=column_kind(declared or ""),
            is_primary_key=bool(pk),
            sample_values=_read_values(conn, name, col_name, limits.max_values_per_column),
        ))

    foreign_keys: List[ForeignKey] = []
    if not is_view:
        rows = conn.execute(f"PRAGMA foreign_key_list({quote_ident(name)})").fetchall()
        for row in sorted(rows, key=lambda r: (r[0], r[1])):
            foreign_keys.append(ForeignKey(column=row[3], ref_table=row[2], ref_column=row[4]))

    return TableSchema(name=name, columns=columns, foreign_keys=foreign_keys, is_view=is_view)


def load_database(
    path: Path | str,
    limits: Optional[CatalogLimits] = None,
    db_id: Optional[str] = None,
) -> DatabaseCatalog:
    """
    Read every user table of a SQLite database into a catalog.

    `path` may be the .sqlite file or a BIRD-style directory; in the latter
    case `database_description/*.csv` is attached when present.
    """
    limits = limits or CatalogLimits()
    source = Path(path)
    db_file = resolve_database_file(source)
    db_id = db_id or (source.name if source.is_dir() else db_file.stem)

    try:
        conn = open_readonly(db_file)
    except sqlite3.Error as exc:
        raise UnreadableDatabaseError(f"cannot open {db_file}: {exc}") from exc

    try:
        kinds = ("table", "view") if limits.include_views else ("table",)
        placeholders = ",".join("?" for _ in kinds)
        master = conn.execute(
            f"SELECT name, type FROM sqlite_master WHERE type IN ({placeholders}) "
            "AND name NOT LIKE 'sqlite_%' ORDER BY name",
            kinds,
        ).fetchall()
        if not master:
            raise EmptyDatabaseError(f"database {db_file} has no tables")
        tables = [_read_table(conn, name, kind == "view", limits) for name, kind in master]
    except sqlite3.DatabaseError as exc:
        raise UnreadableDatabaseError(f"cannot read {db_file}: {exc}") from exc
    finally:
        conn.close()

    catalog = DatabaseCatalog(db_id=db_id, db_path=str(db_file.resolve()), tables=tables)
    logger.info(f"[Catalog] Loaded '{db_id}': {catalog.counts()}")

    if source.is_dir():
        catalog = load_descriptions(source / DESCRIPTION_DIR, catalog)
    return catalog


# ── Descriptions ──────────────────────────────────────────────────────────────

def _read_csv_rows(path: Path) -> List[Dict[str, str]]:
    for encoding in ("utf-8-sig", "latin-1"):
        try:
            with open(path, newline="", encoding=encoding) as fh:
                reader = csv.DictReader(fh)
                if reader.fieldnames:
                    reader.fieldnames = [(f or "").strip().lower() for f in reader.fieldnames]
                return list(reader)
        except UnicodeDecodeError:
            continue
    return []


def _clean(value: Optional[str]) -> str:
    return " ".join((value or "").split())


def load_descriptions(csv_dir: Path | str, catalog: DatabaseCatalog) -> DatabaseCatalog:
    """
    Attach BIRD `database_description/<table>.csv` rows to the catalog.

    Rows naming unknown tables/columns, malformed rows and duplicates are
    skipped, logged and tallied in `descriptions_skipped`.
    """
    directory = Path(csv_dir)
    if not directory.is_dir():
        logger.info(f"[Catalog] No description directory at {directory}")
        return catalog

    tables_by_key = {t.name.lower(): t for t in catalog.tables}
    entries: List[DescriptionEntry] = []
    seen: set[Tuple[str, str]] = set()
    skipped = 0

    for csv_path in sorted(directory.glob("*.csv")):
        table = tables_by_key.get(csv_path.stem.strip().lower())
        rows = _read_csv_rows(csv_path)
        if table is None:
            logger.warning(f"[Catalog] {csv_path.name}: no table '{csv_path.stem}', {len(rows)} row(s) skipped")
            skipped += len(rows)
            continue

        columns_by_key = {c.name.strip().lower(): c.name for c in table.columns}
        for line_no, row in enumerate(rows, start=2):
            raw_name = row.get("original_column_name")
            if raw_name is None or None in row:
                logger.warning(f"[Catalog] {csv_path.name}:{line_no} malformed row skipped")
                skipped += 1
                continue
            name = _clean(raw_name)
            column = name if table.column(name) else columns_by_key.get(name.lower())
            if column is None:
                logger.warning(f"[Catalog] {csv_path.name}:{line_no} unknown column '{name}' skipped")
                skipped += 1
                continue
            if (table.name, column) in seen:
                logger.warning(f"[Catalog] {csv_path.name}:{line_no} duplicate entry for '{column}' skipped")
                skipped += 1
                continue
            seen.add((table.name, column))
            entries.append(DescriptionEntry(
                table=table.name,
                column=column,
                column_description=_clean(row.get("column_description")),
                value_description=_clean(row.get("value_description")),
            ))

    logger.info(f"[Catalog] '{catalog.db_id}': {len(entries)} descriptions attached, {skipped} skipped")
    return DatabaseCatalog(
        db_id=catalog.db_id,
        db_path=catalog.db_path,
        tables=catalog.tables,
        descriptions=entries,
        descriptions_skipped=skipped,
        value_index=catalog.value_index,
    )
