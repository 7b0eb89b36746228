"""Canonical string forms for table values and keywords"""
import math
import re
from decimal import Decimal, InvalidOperation
from typing import Any, Optional

# optional sign, digits, at most one decimal point
NUMERIC_PATTERN = re.compile(r"^[+-]?(?:\d+(?:\.\d*)?|\.\d+)$")


def is_purely_numeric(text: str) -> bool:
    """True for '500', '-3.25', '+.5'; False for dates, ids with dashes, words."""
    return bool(NUMERIC_PATTERN.match(text.strip()))


def canonical_number(text: str) -> str:
    """
    Canonical decimal string for a numeric literal.

    '500' -> '500', '+500.00' -> '500', '1.50' -> '1.5', '-0' -> '0'.
    """
    try:
        number = Decimal(text.strip())
    except InvalidOperation as exc:
        raise ValueError(f"not a number: {text!r}") from exc
    if number == 0:
        return "0"
    return format(number.normalize(), "f")


def canonical_value(raw: Any) -> Optional[str]:
    """
    String form stored in the catalog for a raw SQLite cell.

    Numbers (and numeric-looking text) become canonical decimal strings so the
    exact-match rule can compare strings; blobs and empty text are dropped.
    """
    if raw is None or isinstance(raw, (bytes, bytearray, memoryview)):
        return None
    if isinstance(raw, bool):
        return "1" if raw else "0"
    if isinstance(raw, int):
        return str(raw)
    if isinstance(raw, float):
        if not math.isfinite(raw):
            return str(raw)
        return canonical_number(repr(raw))
    text = str(raw)
    if not text.strip():
        return None
    if is_purely_numeric(text):
        return canonical_number(text)
    return text
