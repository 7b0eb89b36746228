"""Per-item records, aggregation into a MetricReport, and report writers"""
import csv
import io
import json
import logging
from enum import Enum
from pathlib import Path
from statistics import fmean
from typing import Any, Dict, Iterable, List, Literal, Mapping, Optional, Sequence

from pydantic import BaseModel, Field

logger = logging.getLogger(__name__)

JUDGE_MIN, JUDGE_MAX = 1.0, 5.0


class ErrorCategory(str, Enum):
    """Closed vocabulary for manual error analysis."""
    EVIDENCE_MISALIGNMENT = "evidence-misalignment"
    INCORRECT_COLUMN = "incorrect-column"
    INCORRECT_FILTERING = "incorrect-filtering"
    DESCRIPTION_ISSUE = "description-issue"
    INCORRECT_AGGREGATION = "incorrect-aggregation"
    GROUP_BY_DISTINCT_RANK = "group-by/distinct/rank"
    INCORRECT_OPERATION = "incorrect-operation"
    DATE_HANDLING = "date-handling"
    NULL_HANDLING = "null-handling"
    REVISION_ERROR = "revision-error"
    INCORRECT_TABLE = "incorrect-table"


ItemStatus = Literal["ok", "invalid-gold", "pipeline-error"]


class ItemRecord(BaseModel):
    """One evaluated item; metric fields stay None when not computed for it."""
    item_id: str
    db_id: str = ""
    question: str = ""
    status: ItemStatus = "ok"
    error: str = ""
    gold_sql: str = ""
    pred_sql: str = ""
    ex: Optional[bool] = None
    final_status: str = ""
    revisions: int = 0
    keyword_precision: Optional[float] = None
    keyword_recall: Optional[float] = None
    keyword_f1: Optional[float] = None
    bleu1: Optional[float] = None
    bleu2: Optional[float] = None
    rouge1: Optional[float] = None
    rouge2: Optional[float] = None
    rougeL: Optional[float] = None
    judge_raw: Optional[float] = None
    judge_calibrated: Optional[float] = None
    calls: int = 0
    prompt_tokens: int = 0
    completion_tokens: int = 0
    cost_usd: Optional[float] = None
    tags: List[ErrorCategory] = Field(default_factory=list)


class MetricReport(BaseModel):
    n_items: int = 0
    n_valid: int = 0
    n_invalid_gold: int = 0
    n_pipeline_errors: int = 0
    ex: Optional[float] = Field(None, description="None when no item has a valid gold")
    ex_correct: int = 0
    keyword_precision: Optional[float] = None
    keyword_recall: Optional[float] = None
    keyword_f1: Optional[float] = None
    bleu1: Optional[float] = None
    bleu2: Optional[float] = None
    rouge1: Optional[float] = None
    rouge2: Optional[float] = None
    rougeL: Optional[float] = None
    judge_raw: Optional[float] = None
    judge_calibrated: Optional[float] = None
    error_histogram: Dict[str, int] = Field(default_factory=dict)
    totals: Dict[str, Any] = Field(default_factory=dict)
    metadata: Dict[str, Any] = Field(default_factory=dict)
    items: List[ItemRecord] = Field(default_factory=list)


METRIC_FIELDS = (
    "keyword_precision", "keyword_recall", "keyword_f1",
    "bleu1", "bleu2", "rouge1", "rouge2", "rougeL",
    "judge_raw", "judge_calibrated",
)


def clamp_judge(score: Optional[float]) -> Optional[float]:
    return None if score is None else min(JUDGE_MAX, max(JUDGE_MIN, score))


def _mean(values: Iterable[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return fmean(present) if present else None


def aggregate(
    per_item: Sequence[ItemRecord],
    tags: Optional[Mapping[str, Sequence[ErrorCategory | str]]] = None,
    totals: Optional[Dict[str, Any]] = None,
    metadata: Optional[Dict[str, Any]] = None,
) -> MetricReport:
    """
    Fold item records into a report. Items are sorted by id first, so the
    result does not depend on completion order.
    """
    items = sorted(per_item, key=lambda r: r.item_id)
    if tags:
        tagged = []
        for item in items:
            extra = [ErrorCategory(t) for t in tags.get(item.item_id, [])]
            tagged.append(item.model_copy(update={"tags": [*item.tags, *extra]}) if extra else item)
        items = tagged

    invalid = [i for i in items if i.status == "invalid-gold"]
    graded = [i for i in items if i.status != "invalid-gold" and i.ex is not None]
    correct = sum(1 for i in graded if i.ex)

    histogram: Dict[str, int] = {}
    for category in ErrorCategory:
        count = sum(i.tags.count(category) for i in items)
        if count:
            histogram[category.value] = count

    report = MetricReport(
        n_items=len(items),
        n_valid=len(graded),
        n_invalid_gold=len(invalid),
        n_pipeline_errors=sum(1 for i in items if i.status == "pipeline-error"),
        ex=correct / len(graded) if graded else None,
        ex_correct=correct,
        error_histogram=histogram,
        totals=dict(totals or {}),
        metadata={"f1_averaging": "macro", **(metadata or {})},
        items=items,
    )
    means = {name: _mean(getattr(i, name) for i in items) for name in METRIC_FIELDS}
    means["judge_calibrated"] = clamp_judge(means["judge_calibrated"])
    if report.ex is None and items:
        report.metadata["ex_undefined"] = True
    return report.model_copy(update=means)


# ── Writers ───────────────────────────────────────────────────────────────────

CSV_FIELDS = [
    "item_id", "db_id", "status", "ex", "final_status", "revisions",
    "keyword_precision", "keyword_recall", "keyword_f1",
    "bleu1", "bleu2", "rouge1", "rouge2", "rougeL", "judge_raw", "judge_calibrated",
    "calls", "prompt_tokens", "completion_tokens", "cost_usd", "tags", "error", "question", "gold_sql", "pred_sql",
]


def _fmt(value: Optional[float], digits: int = 4) -> str:
    return "-" if value is None else f"{value:.{digits}f}"


def items_csv(report: MetricReport) -> str:
    buffer = io.StringIO()
    writer = csv.DictWriter(buffer, fieldnames=CSV_FIELDS, lineterminator="\n")
    writer.writeheader()
    for item in report.items:
        row = item.model_dump(mode="json")
        row["tags"] = ";".join(row["tags"])
        row["ex"] = "" if item.ex is None else int(item.ex)
        writer.writerow({k: ("" if row.get(k) is None else row[k]) for k in CSV_FIELDS})
    return buffer.getvalue()


def _table(headers: List[str], rows: List[List[str]]) -> str:
    widths = [max(len(h), *(len(r[i]) for r in rows)) if rows else len(h) for i, h in enumerate(headers)]
    line = "  ".join(h.ljust(w) for h, w in zip(headers, widths))
    rule = "  ".join("-" * w for w in widths)
    body = ["  ".join(c.ljust(w) for c, w in zip(r, widths)) for r in rows]
    return "\n".join([line, rule, *body])


def render_text(report: MetricReport, title: str = "Evaluation report") -> str:
    """Aligned human-readable summary."""
    out = [title, "=" * len(title), ""]
    if report.metadata.get("kind") == "nlu":
        out.append(nlu_table({report.metadata.get("model", "model"): report}))
    else:
        ex = "undefined (no valid gold)" if report.ex is None else f"{report.ex:.4f} ({report.ex_correct}/{report.n_valid})"
        out += [
            _table(["metric", "value"], [
                ["items", str(report.n_items)],
                ["EX", ex],
                ["invalid gold (excluded)", str(report.n_invalid_gold)],
                ["pipeline errors", str(report.n_pipeline_errors)],
            ]),
        ]
    totals = report.totals
    if totals:
        cost = totals.get("cost_usd")
        out += ["", _table(["usage", "value"], [
            ["model calls", str(totals.get("calls", 0))],
            ["prompt tokens", str(totals.get("prompt_tokens", 0))],
            ["completion tokens", str(totals.get("completion_tokens", 0))],
            ["cost (USD)", "unknown" if cost is None else f"{cost:.6f}"],
        ])]
    if report.error_histogram:
        out += ["", _table(["error category", "count"], [[k, str(v)] for k, v in report.error_histogram.items()])]
    if report.metadata:
        out += ["", "metadata: " + json.dumps(report.metadata, sort_keys=True)]
    return "\n".join(out) + "\n"


def nlu_table(reports: Mapping[str, MetricReport]) -> str:
    """One row per model: decomposition text metrics, judge scores, keyword P/R/F1."""
    with_judge = any(r.judge_raw is not None for r in reports.values())
    headers = ["model", "BLEU-1", "BLEU-2", "ROUGE-1", "ROUGE-2", "ROUGE-L"]
    if with_judge:
        headers += ["judge raw", "judge cal."]
    headers += ["precision", "recall", "F1"]
    rows = []
    for name, r in reports.items():
        row = [name, _fmt(r.bleu1), _fmt(r.bleu2), _fmt(r.rouge1), _fmt(r.rouge2), _fmt(r.rougeL)]
        if with_judge:
            row += [_fmt(r.judge_raw, 3), _fmt(r.judge_calibrated, 3)]
        row += [_fmt(r.keyword_precision), _fmt(r.keyword_recall), _fmt(r.keyword_f1)]
        rows.append(row)
    return _table(headers, rows)


def write_report(report: MetricReport, out_dir: Path | str, title: str = "Evaluation report") -> Dict[str, Path]:
    """report.json, report.txt and items.csv; byte-identical for identical reports."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "json": out / "report.json",
        "text": out / "report.txt",
        "csv": out / "items.csv",
    }
    paths["json"].write_text(
        json.dumps(report.model_dump(mode="json"), indent=2, sort_keys=True, ensure_ascii=False) + "\n",
        encoding="utf-8",
    )
    paths["text"].write_text(render_text(report, title), encoding="utf-8")
    paths["csv"].write_text(items_csv(report), encoding="utf-8", newline="")
    logger.info(f"[Eval] Report written to {out}")
    return paths


def load_tags(path: Path | str) -> Dict[str, List[ErrorCategory]]:
    """item_id,category CSV; unknown categories are skipped with a warning."""
    tags: Dict[str, List[ErrorCategory]] = {}
    with open(path, newline="", encoding="utf-8-sig") as fh:
        for line_no, row in enumerate(csv.DictReader(fh), start=2):
            item_id = (row.get("item_id") or "").strip()
            raw = (row.get("category") or "").strip().lower()
            try:
                category = ErrorCategory(raw)
            except ValueError:
                logger.warning(f"[Eval] {path}:{line_no} unknown error category '{raw}' skipped")
                continue
            if item_id:
                tags.setdefault(item_id, []).append(category)
    return tags
