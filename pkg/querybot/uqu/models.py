"""Structured question understanding: decompositions, keyword sets, DeKeyNLU records"""
import re
from typing import Any, Dict, List, Literal, Optional, Tuple

from pydantic import BaseModel, Field, field_validator, model_validator

Split = Literal["train", "validation", "test"]

MAIN_PATTERN = re.compile(r"^(\d+)\s*\.(?!\d)\s*(.*)$", re.DOTALL)
SUB_PATTERN = re.compile(r"^(\d+)\.(\d+)\.?\s*(.*)$", re.DOTALL)


def normalize_ws(text: Any) -> str:
    return " ".join(str(text).split())


class UserQuestion(BaseModel):
    model_config = {"frozen": True}

    question: str = Field(..., description="Natural-language question")
    hint: str = Field("", description="Evidence text (BIRD `evidence`), passed on verbatim")
    db_id: str = ""

    @field_validator("question")
    @classmethod
    def _non_empty(cls, value: str) -> str:
        if not value.strip():
            raise ValueError("question must not be empty")
        return value.strip()


# ── Task decomposition ────────────────────────────────────────────────────────

def split_main(item: str) -> Tuple[Optional[int], str]:
    match = MAIN_PATTERN.match(item)
    if match:
        return int(match.group(1)), normalize_ws(match.group(2))
    return None, normalize_ws(item)


def split_sub(item: str) -> Tuple[Optional[Tuple[int, int]], str]:
    match = SUB_PATTERN.match(item)
    if match:
        return (int(match.group(1)), int(match.group(2))), normalize_ws(match.group(3))
    return None, normalize_ws(item)


def numbering_violations(main_tasks: List[str], sub_tasks: List[str]) -> List[str]:
    """Every way the given (already numbered) lists break the numbering rules."""
    violations: List[str] = []
    if not main_tasks:
        violations.append("at least one main task is required")

    mains: List[int] = []
    for item in main_tasks:
        number, text = split_main(item)
        if number is None:
            violations.append(f"main task '{item}' has no number")
            continue
        if not text:
            violations.append(f"main task {number}. is empty")
        if mains and number <= mains[-1]:
            violations.append(f"main task {number}. does not follow {mains[-1]}.")
        mains.append(number)

    previous: Optional[Tuple[int, int]] = None
    for item in sub_tasks:
        number, text = split_sub(item)
        if number is None:
            violations.append(f"sub-task '{item}' has no number")
            continue
        label = f"{number[0]}.{number[1]}"
        if number[0] not in mains:
            violations.append(f"sub-task {label} references missing main task {number[0]}")
        if not text:
            violations.append(f"sub-task {label} is empty")
        if previous is not None and number <= previous:
            violations.append(f"sub-task {label} does not follow {previous[0]}.{previous[1]}")
        previous = number
    return violations


def _number_mains(items: List[str]) -> List[str]:
    out = []
    for position, item in enumerate(items, start=1):
        number, text = split_main(item)
        if number is None:
            out.append(f"{position}. {text}")
        else:
            out.append(f"{number}. {text}")
    return out


def _number_subs(items: List[str], mains: List[str]) -> List[str]:
    single_parent = split_main(mains[0])[0] if len(mains) == 1 else None
    out = []
    counter = 0
    for item in items:
        number, text = split_sub(item)
        if number is not None:
            out.append(f"{number[0]}.{number[1]} {text}")
            counter = number[1] if number[0] == single_parent else counter
        elif single_parent is not None:
            counter += 1
            out.append(f"{single_parent}.{counter} {text}")
        else:
            out.append(text)
    return out


def number_tasks(main_tasks: List[str], sub_tasks: List[str]) -> Tuple[List[str], List[str]]:
    """Whitespace-normalize and fill in missing numbers where they are unambiguous."""
    mains = [m for m in (normalize_ws(x) for x in main_tasks) if m]
    subs = [s for s in (normalize_ws(x) for x in sub_tasks) if s]
    mains = _number_mains(mains)
    return mains, (_number_subs(subs, mains) if mains else subs)


class TaskDecomposition(BaseModel):
    """Numbered main tasks ("1. ...") and sub-tasks ("1.1 ...")."""
    model_config = {"frozen": True}

    main_tasks: List[str] = Field(default_factory=list)
    sub_tasks: List[str] = Field(default_factory=list)

    @model_validator(mode="before")
    @classmethod
    def _normalize(cls, data: Any) -> Any:
        if not isinstance(data, dict):
            return data
        mains, subs = number_tasks(data.get("main_tasks") or [], data.get("sub_tasks") or [])
        return {**data, "main_tasks": mains, "sub_tasks": subs}

    @model_validator(mode="after")
    def _check_numbering(self) -> "TaskDecomposition":
        violations = numbering_violations(self.main_tasks, self.sub_tasks)
        if violations:
            raise ValueError("; ".join(violations))
        return self

    def numbered_subs(self) -> List[Tuple[Tuple[int, int], str]]:
        return [split_sub(s) for s in self.sub_tasks]  # type: ignore[misc]

    def render(self) -> str:
        lines = ["Main tasks:"] + [f"  {m}" for m in self.main_tasks]
        if self.sub_tasks:
            lines += ["Sub-tasks:"] + [f"  {s}" for s in sorted(self.sub_tasks, key=lambda s: split_sub(s)[0])]
        return "\n".join(lines)

    def as_text(self) -> str:
        """Flat text used by BLEU/ROUGE."""
        return " ".join([*self.main_tasks, *self.sub_tasks])


# ── Keywords ──────────────────────────────────────────────────────────────────

def _flatten_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (list, tuple)):
        return ", ".join(normalize_ws(v) for v in value if v is not None)
    return normalize_ws(value)


class KeywordSet(BaseModel):
    """Object keywords (table/column-like terms) and implementation criteria."""
    model_config = {"frozen": True}

    objects: List[str] = Field(default_factory=list)
    implementations: Dict[str, str] = Field(default_factory=dict)

    @field_validator("objects", mode="before")
    @classmethod
    def _dedup_objects(cls, value: Any) -> List[str]:
        if value is None:
            return []
        if isinstance(value, str):
            value = [value]
        seen: set[str] = set()
        out: List[str] = []
        for item in value:
            text = normalize_ws(item) if item is not None else ""
            if not text or text.casefold() in seen:
                continue
            seen.add(text.casefold())
            out.append(text)
        return out

    @field_validator("implementations", mode="before")
    @classmethod
    def _clean_implementations(cls, value: Any) -> Dict[str, str]:
        if value is None:
            return {}
        if not isinstance(value, dict):
            raise ValueError("implementation must be a key/value mapping")
        out: Dict[str, str] = {}
        for key, raw in value.items():
            name = normalize_ws(key)
            if not name:
                raise ValueError("implementation keys must be non-empty")
            out[name] = _flatten_value(raw)
        return out

    def retrieval_keywords(self) -> List[str]:
        """Objects, then implementation keys and values; case-insensitive dedup in first-seen order."""
        seen: set[str] = set()
        out: List[str] = []
        for text in [*self.objects, *(p for kv in self.implementations.items() for p in kv)]:
            if text and text.casefold() not in seen:
                seen.add(text.casefold())
                out.append(text)
        return out


class NluRecord(BaseModel):
    """One DeKeyNLU record."""
    model_config = {"frozen": True}

    index: int = Field(..., description="Position in the source file")
    question: str
    decomposition: TaskDecomposition
    keywords: KeywordSet
    split: Split
    db_id: str = ""
    evidence: str = ""
