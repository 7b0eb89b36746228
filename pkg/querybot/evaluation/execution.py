"""Execution accuracy: compare predicted and gold result sets on the real database"""
import logging
import math
import re
from dataclasses import dataclass
from pathlib import Path
from typing import Any, List, Literal, Optional, Sequence, Tuple

import sqlglot
from sqlglot.errors import SqlglotError

from querybot.errors import InvalidGoldError
from querybot.generation.executor import execute_sql
from querybot.generation.models import ExecutionOutcome

logger = logging.getLogger(__name__)

FLOAT_TOLERANCE = 1e-6
ExMode = Literal["multiset", "set"]

_STRING_LITERAL = re.compile(r"'(?:[^']|'')*'|\"(?:[^\"]|\"\")*\"")


def _order_by_fallback(sql: str) -> bool:
    text = _STRING_LITERAL.sub("''", sql)
    depth = 0
    for i, ch in enumerate(text):
        if ch == "(":
            depth += 1
        elif ch == ")":
            depth -= 1
        elif depth == 0 and re.match(r"ORDER\s+BY\b", text[i:], re.IGNORECASE) and (i == 0 or not text[i - 1].isalnum()):
            return True
    return False


def has_top_level_order_by(sql: str) -> bool:
    """True when the outermost query sorts its result."""
    try:
        tree = sqlglot.parse_one(sql, read="sqlite")
    except SqlglotError:
        return _order_by_fallback(sql)
    return tree is not None and tree.args.get("order") is not None


# ── Cell / row comparison ─────────────────────────────────────────────────────

def cells_equal(a: Any, b: Any) -> bool:
    if a is None or b is None:
        return a is None and b is None
    numeric = (int, float)
    if isinstance(a, numeric) and isinstance(b, numeric) and not isinstance(a, bool) and not isinstance(b, bool):
        if isinstance(a, float) or isinstance(b, float):
            return math.isclose(float(a), float(b), rel_tol=0.0, abs_tol=FLOAT_TOLERANCE)
        return a == b
    return type(a) is type(b) and a == b


def rows_equal(a: Sequence[Any], b: Sequence[Any]) -> bool:
    return len(a) == len(b) and all(cells_equal(x, y) for x, y in zip(a, b))


def _sort_key(row: Sequence[Any]) -> Tuple:
    key = []
    for cell in row:
        if cell is None:
            key.append((0, 0.0, ""))
        elif isinstance(cell, (int, float)) and not isinstance(cell, bool):
            key.append((1, float(cell), ""))
        else:
            key.append((2, 0.0, str(cell)))
    return tuple(key)


def _dedupe(rows: List[Sequence[Any]]) -> List[Sequence[Any]]:
    out: List[Sequence[Any]] = []
    for row in rows:
        if not any(rows_equal(row, kept) for kept in out):
            out.append(row)
    return out


def results_match(
    pred: Sequence[Sequence[Any]],
    gold: Sequence[Sequence[Any]],
    ordered: bool = False,
    mode: ExMode = "multiset",
) -> bool:
    """Row-for-row comparison under float tolerance; order only matters when `ordered`."""
    pred_rows, gold_rows = [tuple(r) for r in pred], [tuple(r) for r in gold]
    if mode == "set":
        pred_rows, gold_rows = _dedupe(pred_rows), _dedupe(gold_rows)
        if not ordered:
            return len(pred_rows) == len(gold_rows) and all(
                any(rows_equal(p, g) for g in gold_rows) for p in pred_rows
            )
    if len(pred_rows) != len(gold_rows):
        return False
    if ordered:
        return all(rows_equal(p, g) for p, g in zip(pred_rows, gold_rows))
    return _multiset_match(pred_rows, gold_rows)


def _multiset_match(pred_rows: List[Sequence[Any]], gold_rows: List[Sequence[Any]]) -> bool:
    # each pred row consumes the first unmatched gold row equal to it under tolerance
    remaining = sorted(gold_rows, key=_sort_key)
    for row in sorted(pred_rows, key=_sort_key):
        for i, candidate in enumerate(remaining):
            if rows_equal(row, candidate):
                del remaining[i]
                break
        else:
            return False
    return not remaining


# ── Entry points ──────────────────────────────────────────────────────────────

@dataclass
class ExComparison:
    ex: bool
    pred: ExecutionOutcome
    gold: ExecutionOutcome
    ordered: bool
    reason: str = ""


def compare_execution(
    pred_sql: str,
    gold_sql: str,
    db_path: Path | str,
    timeout: float = 30.0,
    mode: ExMode = "multiset",
    pred_outcome: Optional[ExecutionOutcome] = None,
) -> ExComparison:
    gold = execute_sql(db_path, gold_sql, timeout)
    if not gold.ok:
        raise InvalidGoldError(gold.error_message or gold.status)
    ordered = has_top_level_order_by(gold_sql)
    pred = pred_outcome if pred_outcome is not None else execute_sql(db_path, pred_sql, timeout) if pred_sql.strip() else None
    if pred is None:
        empty = ExecutionOutcome(status="sql-error", error_message="no prediction")
        return ExComparison(False, empty, gold, ordered, "no prediction")
    if not pred.ok:
        return ExComparison(False, pred, gold, ordered, f"prediction {pred.status}")
    if pred.columns is not None and gold.columns is not None and len(pred.columns) != len(gold.columns):
        return ExComparison(False, pred, gold, ordered, "column count differs")
    match = results_match(pred.rows or [], gold.rows or [], ordered, mode)
    return ExComparison(match, pred, gold, ordered, "" if match else "rows differ")


def execution_accuracy(
    pred_sql: str,
    gold_sql: str,
    db_path: Path | str,
    timeout: float = 30.0,
    mode: ExMode = "multiset",
) -> bool:
    """True iff both run and yield equal results; raises InvalidGoldError when gold fails."""
    return compare_execution(pred_sql, gold_sql, db_path, timeout, mode).ex
