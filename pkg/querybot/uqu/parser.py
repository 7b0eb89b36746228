"""Turn model output into (TaskDecomposition, KeywordSet) and back"""
import json
import re
from typing import Any, Dict, List, Optional, Tuple

from pydantic import ValidationError

from querybot.errors import UquParseError
from querybot.uqu.models import KeywordSet, TaskDecomposition, normalize_ws, number_tasks, numbering_violations

_FENCE = re.compile(r"```[A-Za-z0-9_-]*\s*\n?(.*?)```", re.DOTALL)

REQUIRED_KEYS = ("main_task", "object")


def canonical_key(key: str) -> str:
    """'Main Task', 'main_tasks', 'sub-task' -> 'main_task' / 'sub_task'."""
    name = re.sub(r"[\s\-]+", "_", str(key).strip().lower())
    return name[:-1] if name.endswith("s") else name


def find_json_object(raw: str) -> Optional[Dict[str, Any]]:
    """First JSON object in `raw`, looking inside code fences first."""
    decoder = json.JSONDecoder()
    sources = [m.group(1) for m in _FENCE.finditer(raw)] + [raw]
    for text in sources:
        for match in re.finditer(r"\{", text):
            try:
                obj, _end = decoder.raw_decode(text, match.start())
            except json.JSONDecodeError:
                continue
            if isinstance(obj, dict):
                return obj
    return None


def _as_list(value: Any) -> List[str]:
    if value is None:
        return []
    if isinstance(value, str):
        return [value]
    if isinstance(value, (list, tuple)):
        return [str(v) for v in value if v is not None]
    return [str(value)]


def _as_mapping(value: Any) -> Dict[str, Any]:
    """Implementation maps sometimes arrive as a list of one-key dicts or 'key: value' strings."""
    if value is None:
        return {}
    if isinstance(value, dict):
        return value
    if isinstance(value, str):
        value = [value]
    merged: Dict[str, Any] = {}
    if isinstance(value, (list, tuple)):
        for item in value:
            if isinstance(item, dict):
                merged.update(item)
            elif isinstance(item, str) and ":" in item:
                key, _, val = item.partition(":")
                merged[key] = val
            elif isinstance(item, str) and item.strip():
                merged[item] = ""
        return merged
    raise TypeError(f"cannot read implementation of type {type(value).__name__}")


def structures_from_dict(data: Dict[str, Any], raw: str = "") -> Tuple[TaskDecomposition, KeywordSet]:
    """Validate a decoded object with main_task/sub_task/object/implementation keys."""
    fields = {canonical_key(k): v for k, v in data.items()}
    violations = [f"missing key '{key}'" for key in REQUIRED_KEYS if key not in fields]
    if violations:
        raise UquParseError("model output is missing required keys", raw=raw, violations=violations)

    try:
        implementations = _as_mapping(fields.get("implementation"))
    except TypeError as exc:
        raise UquParseError("bad implementation field", raw=raw, violations=[str(exc)]) from exc

    mains = [normalize_ws(m) for m in _as_list(fields.get("main_task")) if normalize_ws(m)]
    subs = [normalize_ws(s) for s in _as_list(fields.get("sub_task")) if normalize_ws(s)]

    try:
        decomposition = TaskDecomposition(main_tasks=mains, sub_tasks=subs)
    except ValidationError as exc:
        numbered_mains, numbered_subs = number_tasks(mains, subs)
        raise UquParseError(
            "task decomposition violates numbering rules",
            raw=raw,
            violations=numbering_violations(numbered_mains, numbered_subs),
        ) from exc

    try:
        keywords = KeywordSet(objects=_as_list(fields.get("object")), implementations=implementations)
    except ValidationError as exc:
        raise UquParseError(
            "keyword set is invalid", raw=raw, violations=[e["msg"] for e in exc.errors()]
        ) from exc
    return decomposition, keywords


def parse_response(raw: str) -> Tuple[TaskDecomposition, KeywordSet]:
    """Extract and validate the first JSON object of a model reply."""
    data = find_json_object(raw or "")
    if data is None:
        raise UquParseError("no JSON object found in model output", raw=raw or "")
    return structures_from_dict(data, raw)


def response_dict(decomposition: TaskDecomposition, keywords: KeywordSet) -> Dict[str, Any]:
    return {
        "main_task": list(decomposition.main_tasks),
        "sub_task": list(decomposition.sub_tasks),
        "object": list(keywords.objects),
        "implementation": dict(keywords.implementations),
    }


def serialize_response(decomposition: TaskDecomposition, keywords: KeywordSet) -> str:
    """Inverse of parse_response for valid structures."""
    return json.dumps(response_dict(decomposition, keywords), ensure_ascii=False)
