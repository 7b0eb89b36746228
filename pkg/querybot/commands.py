"""
Command implementations behind the CLI: index, ask, eval, bench-nlu and
export-finetune. Each `cmd_*` prints a user-facing summary and returns a
process exit code (0 success, 1 failure, 2 partial success).
"""
import asyncio
import hashlib
import json
import logging
import re
import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence, Tuple

from querybot.benchmarks import Benchmark, BenchmarkItem, check_databases, database_path, discover_databases, load_benchmark
from querybot.catalog.indexer import build_value_index
from querybot.catalog.loader import CatalogLimits, load_database, resolve_database_file
from querybot.catalog.models import DatabaseCatalog
from querybot.catalog.store import CatalogStore, artifact_key, file_sha256
from querybot.clients.factory import Clients, build_clients, transcript_digest
from querybot.clients.llm import UsageLedger
from querybot.clients.mock import transcript_scope
from querybot.config import MAX_REVISION_THRESHOLD, PipelineConfig
from querybot.errors import (
    ConfigError,
    InvalidGoldError,
    PipelineError,
    QueryBotError,
    UnknownDatabaseError,
)
from querybot.evaluation.calibration import DEFAULT_CALIBRATION
from querybot.evaluation.execution import compare_execution
from querybot.evaluation.judge import judge_score
from querybot.evaluation.metrics import bleu, keyword_f1, rouge
from querybot.evaluation.report import ItemRecord, MetricReport, aggregate, load_tags, render_text, write_report
from querybot.generation.pipeline import PipelineDeps, dry_run_prompts, run_pipeline
from querybot.prompts import load_template
from querybot.uqu.dekeynlu import load_dekeynlu, write_finetune
from querybot.uqu.models import NluRecord, UserQuestion
from querybot.uqu.understand import understand

logger = logging.getLogger(__name__)

EXIT_OK, EXIT_FAILURE, EXIT_PARTIAL = 0, 1, 2
MAX_PRINTED_ROWS = 20


# ── Catalogs ──────────────────────────────────────────────────────────────────

def source_digest(source: Path) -> str:
    """Hash of the database file plus any description CSVs next to it."""
    digest = hashlib.sha256(file_sha256(resolve_database_file(source)).encode())
    descriptions = source / "database_description" if source.is_dir() else None
    if descriptions is not None and descriptions.is_dir():
        for csv_path in sorted(descriptions.glob("*.csv")):
            digest.update(f"|{csv_path.name}:{file_sha256(csv_path)}".encode())
    return digest.hexdigest()


def index_database(
    db_id: str,
    source: Path,
    config: PipelineConfig,
    store: CatalogStore,
) -> Tuple[DatabaseCatalog, bool]:
    """(catalog with its value index, served-from-cache flag)."""
    key = artifact_key(
        source_digest(source), config.seed, config.num_permutations,
        config.max_values_per_column, config.include_views,
    )
    cached = store.load(db_id, key)
    if cached is not None:
        logger.info(f"[Index] '{db_id}' unchanged, using cached artifact")
        return cached[0], True

    limits = CatalogLimits(max_values_per_column=config.max_values_per_column, include_views=config.include_views)
    catalog = load_database(source, limits, db_id=db_id)
    index = build_value_index(catalog, config.num_permutations, config.seed)
    store.save(catalog, index, key)
    return catalog.with_index(index), False


def ensure_catalog(db_id: str, config: PipelineConfig, db_root: Optional[Path | str] = None) -> DatabaseCatalog:
    """
    Catalog for `db_id`: (re)indexed from `db_root` when it is given and
    holds the database, otherwise the latest stored artifact.
    """
    store = CatalogStore(config.cache_path)
    source = database_path(db_root, db_id)
    if source is not None:
        return index_database(db_id, source, config, store)[0]
    loaded = store.load_latest(db_id)
    if loaded is None:
        available = set(store.known_ids())
        if db_root is not None:
            available |= set(discover_databases(db_root))
        raise UnknownDatabaseError(db_id, sorted(available))
    return loaded[0]


@dataclass
class IndexSummary:
    built: List[str] = field(default_factory=list)
    cached: List[str] = field(default_factory=list)
    failed: List[Tuple[str, str]] = field(default_factory=list)

    @property
    def exit_code(self) -> int:
        if not self.failed:
            return EXIT_OK if (self.built or self.cached) else EXIT_FAILURE
        return EXIT_PARTIAL if (self.built or self.cached) else EXIT_FAILURE


def run_index(db_root: Path | str, config: PipelineConfig) -> IndexSummary:
    store = CatalogStore(config.cache_path)
    summary = IndexSummary()
    databases = discover_databases(db_root)
    if not databases:
        logger.warning(f"[Index] No databases found under {db_root}")
    for db_id, source in databases.items():
        try:
            catalog, cached = index_database(db_id, source, config, store)
        except (QueryBotError, OSError) as exc:
            logger.warning(f"[Index] '{db_id}' failed: {exc}")
            summary.failed.append((db_id, str(exc)))
            print(f"  {db_id}: FAILED ({exc})")
            continue
        counts = catalog.counts()
        (summary.cached if cached else summary.built).append(db_id)
        state = "cached" if cached else "built"
        print(
            f"  {db_id}: {state} ({counts['tables']} tables, {counts['columns']} columns, "
            f"{counts['values']} values, {counts['descriptions']} descriptions)"
        )
    return summary


def cmd_index(db_root: Path | str, config: PipelineConfig, out: Optional[Path | str] = None) -> int:
    if out is not None:
        config = config.model_copy(update={"cache_dir": str(out)})
    print(f"Indexing databases under {db_root} -> {config.cache_path / 'catalogs'}")
    summary = run_index(db_root, config)
    print(f"Done: {len(summary.built)} built, {len(summary.cached)} cached, {len(summary.failed)} failed")
    return summary.exit_code


# ── ask ───────────────────────────────────────────────────────────────────────

def trace_path(config: PipelineConfig, question: UserQuestion) -> Path:
    digest = hashlib.sha256(f"{question.db_id}|{question.question}|{question.hint}".encode()).hexdigest()[:12]
    return config.cache_path / "traces" / f"{question.db_id}-{digest}.json"


def _print_rows(columns: Optional[Sequence[str]], rows: Sequence[Sequence[Any]]) -> None:
    if columns:
        print("\t".join(columns))
    for row in rows[:MAX_PRINTED_ROWS]:
        print("\t".join("NULL" if v is None else str(v) for v in row))
    if len(rows) > MAX_PRINTED_ROWS:
        print(f"... {len(rows) - MAX_PRINTED_ROWS} more row(s)")


async def run_ask(
    question: UserQuestion,
    catalog: DatabaseCatalog,
    config: PipelineConfig,
    clients: Optional[Clients] = None,
):
    clients = clients or build_clients(config)
    deps = PipelineDeps(catalog=catalog, clients=clients)
    return await run_pipeline(question, deps, config, clients.ledger)


def cmd_ask(
    question: str,
    db_id: str,
    config: PipelineConfig,
    hint: str = "",
    db_root: Optional[Path | str] = None,
    dry_run: bool = False,
    trace_out: Optional[Path | str] = None,
) -> int:
    try:
        catalog = ensure_catalog(db_id, config, db_root)
    except QueryBotError as exc:
        print(f"error: {exc}")
        return EXIT_FAILURE
    user_question = UserQuestion(question=question, hint=hint, db_id=db_id)

    if dry_run:
        for stage, prompt in dry_run_prompts(user_question, catalog).items():
            print(f"──── {stage} prompt ────")
            print(prompt)
        return EXIT_OK

    clients = build_clients(config)
    started = time.perf_counter()
    try:
        run = asyncio.run(run_ask(user_question, catalog, config, clients))
    except PipelineError as exc:
        print(f"error: [{exc.stage}] {exc.cause}")
        return EXIT_FAILURE
    elapsed = time.perf_counter() - started

    path = Path(trace_out) if trace_out else trace_path(config, user_question)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(run.to_trace(), indent=2, ensure_ascii=False, default=str), encoding="utf-8")

    usage = clients.ledger.summary(config.prices)
    cost = "unknown" if usage["cost_usd"] is None else f"${usage['cost_usd']:.6f}"
    print(run.final_sql)
    print()
    if run.final.ok:
        _print_rows(run.final.columns, run.final.rows or [])
    else:
        print(f"{run.final.status}: {run.final.error_message}")
    print()
    print(
        f"revisions: {len(run.trace) - 1}  time: {elapsed:.2f}s  "
        f"tokens: {usage['prompt_tokens']}+{usage['completion_tokens']}  cost: {cost}"
    )
    print(f"trace: {path}")
    return EXIT_OK if run.final.ok else EXIT_FAILURE


# ── eval ──────────────────────────────────────────────────────────────────────

def run_key(benchmark: Benchmark, config: PipelineConfig) -> str:
    """Identity of an eval run; per-item results are cached under it."""
    settings_part = config.model_dump(mode="json", exclude={"workers", "cache_dir", "mock_transcript"})
    payload = {
        "benchmark": file_sha256(benchmark.source),
        "config": settings_part,
        "transcript": transcript_digest(config.mock_transcript) if config.mock_transcript else None,
    }
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class ItemStore:
    """One JSON file per finished item, so an interrupted eval resumes where it stopped."""

    def __init__(self, root: Path):
        self.root = root
        self.root.mkdir(parents=True, exist_ok=True)

    def _path(self, item_id: str) -> Path:
        safe = re.sub(r"[^\w.-]", "_", item_id)
        return self.root / f"{safe}.json"

    def get(self, item_id: str) -> Optional[ItemRecord]:
        path = self._path(item_id)
        if not path.exists():
            return None
        try:
            return ItemRecord.model_validate_json(path.read_text(encoding="utf-8"))
        except ValueError:
            logger.warning(f"[Eval] Unreadable cached result {path.name}, re-running")
            return None

    def put(self, record: ItemRecord) -> None:
        path = self._path(record.item_id)
        tmp = path.with_suffix(".tmp")
        tmp.write_text(record.model_dump_json(), encoding="utf-8")
        tmp.replace(path)


async def evaluate_item(
    item: BenchmarkItem,
    deps: PipelineDeps,
    config: PipelineConfig,
) -> Tuple[ItemRecord, UsageLedger]:
    ledger = UsageLedger()
    question = UserQuestion(question=item.question, hint=item.evidence, db_id=item.db_id)
    base = {"item_id": item.item_id, "db_id": item.db_id, "question": item.question, "gold_sql": item.gold_sql}

    run, error = None, ""
    try:
        run = await run_pipeline(question, deps, config, ledger)
    except PipelineError as exc:
        error = str(exc)
        logger.warning(f"[Eval] {item.item_id}: {exc}")

    usage = {
        "calls": ledger.calls(),
        "prompt_tokens": ledger.prompt_tokens,
        "completion_tokens": ledger.completion_tokens,
        "cost_usd": ledger.cost(config.prices),
    }
    pred_sql = run.final_sql if run else ""
    try:
        comparison = await asyncio.to_thread(
            compare_execution, pred_sql, item.gold_sql, deps.catalog.db_path,
            config.sql_timeout_s, config.ex_mode, run.final if run else None,
        )
    except InvalidGoldError as exc:
        logger.warning(f"[Eval] {item.item_id}: gold SQL fails, excluded from EX ({exc.engine_message})")
        return ItemRecord(**base, **usage, status="invalid-gold", error=str(exc), pred_sql=pred_sql), ledger

    return ItemRecord(
        **base,
        **usage,
        status="pipeline-error" if run is None else "ok",
        error=error or comparison.reason,
        pred_sql=pred_sql,
        ex=comparison.ex,
        final_status=run.trace.final_status if run else "",
        revisions=len(run.trace) - 1 if run else 0,
    ), ledger


def usage_totals(items: Sequence[ItemRecord]) -> Dict[str, Any]:
    costs = [i.cost_usd for i in items]
    cost = None if any(c is None for c in costs) else round(sum(costs), 6)
    return {
        "calls": sum(i.calls for i in items),
        "prompt_tokens": sum(i.prompt_tokens for i in items),
        "completion_tokens": sum(i.completion_tokens for i in items),
        "cost_usd": cost,
        "cost_status": "known" if cost is not None else "unknown",
    }


def cache_state(stats: Dict[str, int]) -> str:
    hits, misses = stats.get("hits", 0), stats.get("misses", 0)
    if hits and not misses:
        return "warm"
    if misses and not hits:
        return "cold"
    return "mixed" if hits else "none"


@dataclass
class EvalResult:
    report: MetricReport
    timings: Dict[str, Any]
    paths: Dict[str, Path] = field(default_factory=dict)


async def run_eval(
    benchmark: Benchmark,
    config: PipelineConfig,
    db_root: Path | str,
    out_dir: Path | str,
    tags: Optional[Dict[str, Any]] = None,
    clients: Optional[Clients] = None,
) -> EvalResult:
    """
    Evaluate every item with a bounded worker pool. Missing databases are
    reported before any model is called.
    """
    available = discover_databases(db_root)
    check_databases(benchmark.db_ids, available)

    started = time.perf_counter()
    clients = clients or build_clients(config)
    deps = {db_id: PipelineDeps(catalog=ensure_catalog(db_id, config, db_root), clients=clients)
            for db_id in benchmark.db_ids}
    for dep in deps.values():
        dep.get_retriever(config)

    key = run_key(benchmark, config)
    item_store = ItemStore(config.cache_path / "eval" / key[:16])
    semaphore = asyncio.Semaphore(config.workers)
    resumed = 0

    async def bounded(item: BenchmarkItem) -> ItemRecord:
        nonlocal resumed
        async with semaphore:
            cached = item_store.get(item.item_id)
            if cached is not None:
                resumed += 1
                return cached
            with transcript_scope(f"{key[:16]}/{item.item_id}"):
                record, ledger = await evaluate_item(item, deps[item.db_id], config)
            clients.ledger.extend(ledger)
            item_store.put(record)
            logger.info(f"[Eval] {item.item_id}: {record.status} ex={record.ex}")
            return record

    records = await asyncio.gather(*[bounded(item) for item in benchmark.items])

    metadata = {
        "kind": "ex",
        "benchmark": benchmark.name,
        "layout": benchmark.layout,
        "scorer": config.scorer,
        "revision_threshold": config.revision_threshold,
        "ex_mode": config.ex_mode,
        "modules": {"uqu": config.use_uqu, "retrieval": config.use_retrieval, "revision": config.use_revision},
        "models": {
            "uqu": config.uqu.model_id,
            "generation": config.generation.model_id,
            "revision": config.revision.model_id,
        },
    }
    report = aggregate(records, tags=tags, totals=usage_totals(records), metadata=metadata)
    paths = write_report(report, out_dir, title=f"Execution accuracy: {benchmark.name}")

    stats = clients.cache.stats() if clients.cache else {}
    timings = {
        "wall_time_s": round(time.perf_counter() - started, 3),
        "model_latency_s": {k: round(v, 3) for k, v in clients.ledger.latency_by_stage().items()},
        "response_cache": {**stats, "state": cache_state(stats)},
        "items_resumed": resumed,
        "workers": config.workers,
    }
    timings_path = Path(out_dir) / "timings.json"
    timings_path.write_text(json.dumps(timings, indent=2, sort_keys=True), encoding="utf-8")
    paths["timings"] = timings_path
    return EvalResult(report=report, timings=timings, paths=paths)


def parse_threshold_range(text: str) -> List[int]:
    """'1-5' -> [1, 2, 3, 4, 5]; '3' -> [3]; bounds must lie in [1, 5]."""
    match = re.fullmatch(r"\s*(\d+)\s*(?:-\s*(\d+)\s*)?", text or "")
    if match is None:
        raise ConfigError(f"threshold range must look like '1-5', got {text!r}")
    low = int(match.group(1))
    high = int(match.group(2) or low)
    if not 1 <= low <= high <= MAX_REVISION_THRESHOLD:
        raise ConfigError(f"threshold range {text!r} must lie within [1, {MAX_REVISION_THRESHOLD}]")
    return list(range(low, high + 1))


def with_threshold(config: PipelineConfig, threshold: int) -> PipelineConfig:
    return PipelineConfig.model_validate({**config.model_dump(), "revision_threshold": threshold})


def sweep_table(rows: Sequence[Dict[str, Any]]) -> str:
    lines = ["threshold  time(s)    cost(USD)   EX", "---------  ---------  ----------  ------"]
    for row in rows:
        cost = "unknown" if row["cost_usd"] is None else f"{row['cost_usd']:.6f}"
        ex = "-" if row["ex"] is None else f"{row['ex'] * 100:.2f}"
        lines.append(f"{row['threshold']:<9}  {row['time_s']:<9.2f}  {cost:<10}  {ex}")
    return "\n".join(lines) + "\n"


def cmd_eval(
    benchmark_path: Path | str,
    config: PipelineConfig,
    db_root: Path | str,
    out_dir: Path | str,
    split: str = "dev",
    limit: Optional[int] = None,
    tags_path: Optional[Path | str] = None,
    sweep: Optional[str] = None,
) -> int:
    try:
        benchmark = load_benchmark(benchmark_path, split)
        if limit is not None:
            benchmark.items = benchmark.items[:limit]
        tags = load_tags(tags_path) if tags_path else None
        thresholds = parse_threshold_range(sweep) if sweep else None
        check_databases(benchmark.db_ids, discover_databases(db_root))
    except (QueryBotError, OSError) as exc:
        print(f"error: {exc}")
        return EXIT_FAILURE

    out = Path(out_dir)
    if thresholds is None:
        result = asyncio.run(run_eval(benchmark, config, db_root, out, tags))
        print(render_text(result.report, title=f"Execution accuracy: {benchmark.name}"), end="")
        print(f"wall time: {result.timings['wall_time_s']:.2f}s  cache: {result.timings['response_cache']['state']}")
        print(f"report: {result.paths['json']}")
        return EXIT_PARTIAL if result.report.n_pipeline_errors else EXIT_OK

    # one response cache across thresholds, so lower thresholds' calls are reused
    clients = build_clients(config)
    rows: List[Dict[str, Any]] = []
    for threshold in thresholds:
        swept = with_threshold(config, threshold)
        result = asyncio.run(run_eval(
            benchmark, swept, db_root, out / f"threshold-{threshold}", tags, replace(clients, ledger=UsageLedger()),
        ))
        rows.append({
            "threshold": threshold,
            "time_s": result.timings["wall_time_s"],
            "cost_usd": result.report.totals.get("cost_usd"),
            "ex": result.report.ex,
        })
        logger.info(f"[Eval] Threshold {threshold}: ex={result.report.ex}")
    (out / "sweep.json").write_text(json.dumps(rows, indent=2), encoding="utf-8")
    table = sweep_table(rows)
    (out / "sweep.txt").write_text(table, encoding="utf-8")
    print(table, end="")
    return EXIT_OK


# ── bench-nlu ─────────────────────────────────────────────────────────────────

async def evaluate_nlu_record(
    record: NluRecord,
    clients: Clients,
    config: PipelineConfig,
    template: str,
) -> ItemRecord:
    ledger = UsageLedger()
    base = {"item_id": f"{record.index:05d}", "db_id": record.db_id, "question": record.question}
    question = UserQuestion(question=record.question, hint=record.evidence, db_id=record.db_id)
    try:
        understanding = await understand(
            question, clients.uqu, template, config.uqu, clients.cache, config.retry, ledger,
        )
    except QueryBotError as exc:
        logger.warning(f"[Eval] NLU record {record.index}: {exc}")
        zeros = dict.fromkeys(
            ("keyword_precision", "keyword_recall", "keyword_f1", "bleu1", "bleu2", "rouge1", "rouge2", "rougeL"), 0.0
        )
        return ItemRecord(**base, **zeros, status="pipeline-error", error=str(exc),
                          calls=ledger.calls(), prompt_tokens=ledger.prompt_tokens,
                          completion_tokens=ledger.completion_tokens, cost_usd=ledger.cost(config.prices))

    candidate_text = understanding.decomposition.as_text()
    gold_text = record.decomposition.as_text()
    precision, recall, f1 = keyword_f1(understanding.keywords, record.keywords)
    text_metrics: Dict[str, Optional[float]] = {}
    if gold_text.strip():
        r1, r2, rl = rouge(candidate_text, gold_text)
        text_metrics = {
            "bleu1": bleu(candidate_text, gold_text, 1),
            "bleu2": bleu(candidate_text, gold_text, 2),
            "rouge1": r1, "rouge2": r2, "rougeL": rl,
        }

    judge_raw = judge_calibrated = None
    if config.judge_enabled:
        try:
            judge_raw = await judge_score(
                clients.judge, understanding.decomposition, record.decomposition,
                question=record.question, endpoint=config.judge,
                cache=clients.cache, policy=config.retry, ledger=ledger,
            )
            judge_calibrated = DEFAULT_CALIBRATION.calibrate(judge_raw)
        except QueryBotError as exc:
            logger.warning(f"[Eval] NLU record {record.index}: judge failed ({exc})")

    return ItemRecord(
        **base,
        **text_metrics,
        keyword_precision=precision,
        keyword_recall=recall,
        keyword_f1=f1,
        judge_raw=judge_raw,
        judge_calibrated=judge_calibrated,
        calls=ledger.calls(),
        prompt_tokens=ledger.prompt_tokens,
        completion_tokens=ledger.completion_tokens,
        cost_usd=ledger.cost(config.prices),
    )


async def run_bench_nlu(
    records: Sequence[NluRecord],
    config: PipelineConfig,
    out_dir: Path | str,
    clients: Optional[Clients] = None,
    split: str = "test",
) -> MetricReport:
    clients = clients or build_clients(config)
    template = load_template("uqu")
    semaphore = asyncio.Semaphore(config.workers)

    async def bounded(record: NluRecord) -> ItemRecord:
        async with semaphore:
            with transcript_scope(f"nlu/{record.index}"):
                return await evaluate_nlu_record(record, clients, config, template)

    items = await asyncio.gather(*[bounded(r) for r in records])
    metadata: Dict[str, Any] = {
        "kind": "nlu",
        "model": config.uqu.model_id,
        "split": split,
        "judge": "enabled" if config.judge_enabled else "disabled (judge columns omitted)",
        "text_metrics_on": "decomposition main + sub tasks",
    }
    if config.judge_enabled:
        metadata["judge_model"] = config.judge.model_id
        metadata["calibration"] = {"slope": DEFAULT_CALIBRATION.slope, "intercept": DEFAULT_CALIBRATION.intercept}
    report = aggregate(items, totals=usage_totals(items), metadata=metadata)
    write_report(report, out_dir, title=f"Question understanding: {config.uqu.model_id}")
    return report


def cmd_bench_nlu(
    dekeynlu_path: Path | str,
    config: PipelineConfig,
    out_dir: Path | str,
    split: str = "test",
    limit: Optional[int] = None,
) -> int:
    try:
        loaded = load_dekeynlu(dekeynlu_path)
    except (QueryBotError, OSError, ValueError) as exc:
        print(f"error: {exc}")
        return EXIT_FAILURE
    records = loaded.split(split)[:limit] if limit is not None else loaded.split(split)
    if not records:
        print(f"error: no records in split '{split}' (splits: {loaded.split_counts})")
        return EXIT_FAILURE
    print(f"Evaluating {len(records)} {split} record(s) ({len(loaded.skipped)} skipped at load)")
    report = asyncio.run(run_bench_nlu(records, config, out_dir, split=split))
    print(render_text(report, title=f"Question understanding: {config.uqu.model_id}"), end="")
    return EXIT_PARTIAL if report.n_pipeline_errors else EXIT_OK


def cmd_export_finetune(
    dekeynlu_path: Path | str,
    out_path: Path | str,
    style: str = "chat",
    split: str = "train",
) -> int:
    try:
        loaded = load_dekeynlu(dekeynlu_path)
        records = loaded.split(split)
        path = write_finetune(records, out_path, style)
    except (QueryBotError, OSError, ValueError) as exc:
        print(f"error: {exc}")
        return EXIT_FAILURE
    print(f"Wrote {2 * len(records)} {style} example(s) from {len(records)} {split} record(s) -> {path}")
    return EXIT_OK
