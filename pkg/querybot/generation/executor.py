"""Read-only SQL execution with a hard timeout"""
import logging
import re
import sqlite3
import threading
import time
from pathlib import Path
from typing import Any, List, Tuple

from querybot.catalog.loader import open_readonly
from querybot.generation.models import ExecutionOutcome

logger = logging.getLogger(__name__)

READ_KEYWORDS = ("SELECT", "WITH", "VALUES")
WRITE_FORBIDDEN = "write-forbidden"

_ALLOWED_ACTIONS = {
    sqlite3.SQLITE_SELECT,
    sqlite3.SQLITE_READ,
    sqlite3.SQLITE_FUNCTION,
    getattr(sqlite3, "SQLITE_RECURSIVE", 33),
}
_LEADING_COMMENTS = re.compile(r"^(?:\s+|--[^\n]*\n?|/\*.*?\*/)*", re.DOTALL)


def leading_keyword(sql: str) -> str:
    body = _LEADING_COMMENTS.sub("", sql, count=1).lstrip("(").lstrip()
    match = re.match(r"[A-Za-z]+", body)
    return match.group(0).upper() if match else ""


def _cell(value: Any) -> Any:
    if isinstance(value, (bytes, bytearray, memoryview)):
        return bytes(value).hex()
    return value


def execute_sql(db_path: Path | str, sql: str, timeout: float = 30.0) -> ExecutionOutcome:
    """
    Run one read statement against a SQLite file opened read-only.

    Writes never reach the engine: non-read statements are rejected up front
    and an authorizer denies any write action that slips through.
    """
    start = time.perf_counter()

    keyword = leading_keyword(sql)
    if keyword not in READ_KEYWORDS:
        return ExecutionOutcome(
            status="sql-error",
            error_message=f"{WRITE_FORBIDDEN}: only read statements may run (got {keyword or 'nothing'})",
            elapsed=time.perf_counter() - start,
        )

    try:
        conn = open_readonly(Path(db_path))
    except sqlite3.Error as exc:
        return ExecutionOutcome(status="sql-error", error_message=str(exc), elapsed=time.perf_counter() - start)

    denied: List[int] = []

    def _authorize(action: int, *_args: Any) -> int:
        if action in _ALLOWED_ACTIONS:
            return sqlite3.SQLITE_OK
        denied.append(action)
        return sqlite3.SQLITE_DENY

    timed_out = threading.Event()

    def _interrupt() -> None:
        timed_out.set()
        conn.interrupt()

    timer = threading.Timer(timeout, _interrupt)
    conn.set_authorizer(_authorize)
    timer.start()
    try:
        cur = conn.execute(sql)
        raw_rows = cur.fetchall()
        columns = [d[0] for d in cur.description] if cur.description else []
        timer.cancel()
        if timed_out.is_set():
            return ExecutionOutcome(status="timeout", elapsed=time.perf_counter() - start)
        rows: List[Tuple[Any, ...]] = [tuple(_cell(v) for v in row) for row in raw_rows]
        return ExecutionOutcome(status="ok", rows=rows, columns=columns, elapsed=time.perf_counter() - start)
    except (sqlite3.Error, sqlite3.Warning) as exc:
        elapsed = time.perf_counter() - start
        if timed_out.is_set():
            logger.info(f"[Generation] Statement interrupted after {timeout}s")
            return ExecutionOutcome(status="timeout", elapsed=elapsed)
        message = str(exc)
        if denied:
            message = f"{WRITE_FORBIDDEN}: {message}"
        return ExecutionOutcome(status="sql-error", error_message=message, elapsed=elapsed)
    finally:
        timer.cancel()
        conn.close()
