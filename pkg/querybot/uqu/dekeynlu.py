"""
DeKeyNLU records: loading, split assignment, and fine-tuning export.

A file is a JSON list (or {"data": [...]}) of objects with the fields
`question`, `main_task`, `sub_task`, `object`, `implementation`
(space/plural spellings such as "main task" are accepted) and optionally
`split`, `db_id`, `evidence`.
"""
import json
import logging
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from querybot.errors import UnknownStyleError, UquParseError
from querybot.uqu.models import KeywordSet, NluRecord, TaskDecomposition
from querybot.uqu.parser import canonical_key, structures_from_dict

logger = logging.getLogger(__name__)

REQUIRED_FIELDS = ("question", "main_task", "sub_task", "object", "implementation")
SPLITS = ("train", "validation", "test")
SPLIT_RATIOS = (0.7, 0.2, 0.1)
_SPLIT_ALIASES = {"train": "train", "training": "train", "validation": "validation", "val": "validation",
                  "dev": "validation", "test": "test", "testing": "test"}


@dataclass
class NluLoad:
    records: List[NluRecord] = field(default_factory=list)
    skipped: List[Tuple[int, str]] = field(default_factory=list)

    @property
    def split_counts(self) -> Dict[str, int]:
        counts = Counter(r.split for r in self.records)
        return {s: counts.get(s, 0) for s in SPLITS}

    def split(self, name: str) -> List[NluRecord]:
        return [r for r in self.records if r.split == name]


def positional_splits(n: int) -> List[str]:
    """70/20/10 by position: round(0.7n) train, round(0.2n) validation, the rest test."""
    n_train = round(n * SPLIT_RATIOS[0])
    n_val = min(round(n * SPLIT_RATIOS[1]), n - n_train)
    return ["train"] * n_train + ["validation"] * n_val + ["test"] * (n - n_train - n_val)


def _read_items(path: Path) -> List[Any]:
    data = json.loads(path.read_text(encoding="utf-8"))
    if isinstance(data, dict):
        data = data.get("data", data.get("records", []))
    if not isinstance(data, list):
        raise ValueError(f"{path}: expected a JSON list of records")
    return data


def load_dekeynlu(path: Path | str) -> NluLoad:
    """
    Parse every record; bad records are skipped with their index and reason.

    Explicit `split` fields are used when every record has one, otherwise the
    70/20/10 positional split is applied to the records that loaded.
    """
    items = _read_items(Path(path))
    parsed: List[Tuple[int, Dict[str, Any], TaskDecomposition, KeywordSet]] = []
    load = NluLoad()

    for index, item in enumerate(items):
        if not isinstance(item, dict):
            load.skipped.append((index, "record is not an object"))
            continue
        fields = {canonical_key(k): v for k, v in item.items()}
        missing = [f for f in REQUIRED_FIELDS if f not in fields]
        if missing:
            load.skipped.append((index, f"missing field(s): {', '.join(missing)}"))
            continue
        if not str(fields["question"] or "").strip():
            load.skipped.append((index, "empty question"))
            continue
        try:
            decomposition, keywords = structures_from_dict(fields)
        except UquParseError as exc:
            load.skipped.append((index, str(exc)))
            continue
        parsed.append((index, fields, decomposition, keywords))

    explicit = [_SPLIT_ALIASES.get(str(f.get("split", "")).strip().lower()) for _i, f, _d, _k in parsed]
    if parsed and all(explicit):
        splits = explicit
    else:
        if any(explicit):
            logger.warning("[UQU] Some records lack a valid split; using the 70/20/10 positional split for all")
        splits = positional_splits(len(parsed))

    for (index, fields, decomposition, keywords), split in zip(parsed, splits):
        load.records.append(NluRecord(
            index=index,
            question=" ".join(str(fields["question"]).split()),
            decomposition=decomposition,
            keywords=keywords,
            split=split,
            db_id=str(fields.get("db_id") or ""),
            evidence=str(fields.get("evidence") or ""),
        ))

    for index, reason in load.skipped:
        logger.warning(f"[UQU] DeKeyNLU record {index} skipped: {reason}")
    logger.info(f"[UQU] Loaded {len(load.records)} DeKeyNLU record(s), {len(load.skipped)} skipped, splits {load.split_counts}")
    return load


# ── Fine-tuning export ────────────────────────────────────────────────────────

DECOMPOSITION_INSTRUCTION = (
    "Decompose the database question into numbered main tasks and sub-tasks. "
    "Reply with JSON {\"main_task\": [...], \"sub_task\": [...]}."
)
EXTRACTION_INSTRUCTION = (
    "Extract keywords from the database question: objects that match table or column names, "
    "and implementations mapping a filter action to its value. "
    "Reply with JSON {\"object\": [...], \"implementation\": {...}}."
)

STYLES = ("chat", "alpaca")


def _dumps(obj: Any) -> str:
    return json.dumps(obj, ensure_ascii=False)


def _user_text(record: NluRecord) -> str:
    if record.evidence:
        return f"Question: {record.question}\nHint: {record.evidence}"
    return f"Question: {record.question}"


def training_items(record: NluRecord) -> List[Tuple[str, str, str]]:
    """(instruction, input, target) for the decomposition task then the extraction task."""
    decomposition_target = _dumps({
        "main_task": list(record.decomposition.main_tasks),
        "sub_task": list(record.decomposition.sub_tasks),
    })
    extraction_target = _dumps({
        "object": list(record.keywords.objects),
        "implementation": dict(record.keywords.implementations),
    })
    user = _user_text(record)
    return [
        (DECOMPOSITION_INSTRUCTION, user, decomposition_target),
        (EXTRACTION_INSTRUCTION, user, extraction_target),
    ]


def export_finetune(records: Sequence[NluRecord], style: str = "chat") -> str:
    """JSONL with two training items per record, in record order."""
    if style not in STYLES:
        raise UnknownStyleError(f"unknown export style '{style}' (expected one of: {', '.join(STYLES)})")
    lines: List[str] = []
    for record in records:
        for instruction, user, target in training_items(record):
            if style == "chat":
                item: Dict[str, Any] = {"messages": [
                    {"role": "system", "content": instruction},
                    {"role": "user", "content": user},
                    {"role": "assistant", "content": target},
                ]}
            else:
                item = {"instruction": instruction, "input": user, "output": target}
            lines.append(_dumps(item))
    return "".join(line + "\n" for line in lines)


def write_finetune(records: Sequence[NluRecord], path: Path | str, style: str = "chat") -> Path:
    out = Path(path)
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(export_finetune(records, style), encoding="utf-8")
    logger.info(f"[UQU] Wrote {2 * len(records)} training item(s) to {out}")
    return out
