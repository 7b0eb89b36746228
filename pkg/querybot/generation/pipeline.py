"""
End-to-end run for one question:

    understand -> retrieve -> build prompt -> generate -> execute -> (revise -> execute)*

Each stage failure is re-raised as PipelineError labelled with the stage.
"""
import logging
import re
import time
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

from querybot.catalog.models import DatabaseCatalog
from querybot.clients.factory import Clients
from querybot.clients.llm import UsageLedger
from querybot.config import PipelineConfig
from querybot.errors import PipelineError
from querybot.generation.executor import execute_sql
from querybot.generation.generator import generate_sql, revise
from querybot.generation.models import ExecutionOutcome, GenerationPrompt, RevisionTrace, TraceStep
from querybot.generation.prompt import build_prompt
from querybot.prompts import load_template
from querybot.retrieval.models import RetrievedEntities
from querybot.retrieval.retriever import EntityRetriever, KeywordHits
from querybot.retrieval.scorers import make_scorer
from querybot.uqu.models import KeywordSet, TaskDecomposition, UserQuestion
from querybot.uqu.understand import render_uqu_prompt, understand

logger = logging.getLogger(__name__)

STOPWORDS = frozenset("""
a an the of in on at to for from by with and or not is are was were be been being do does did
what which who whom whose when where why how many much all any each every list give show tell
find name state please that this these those it its their there than as per among me i
""".split())


def content_words(question: str) -> List[str]:
    """Keywords for runs without question understanding: quoted phrases, then non-stopwords."""
    seen: set[str] = set()
    out: List[str] = []
    quoted = re.findall(r"['\"]([^'\"]+)['\"]", question)
    words = re.findall(r"[^\W_][\w\-./]*", re.sub(r"['\"][^'\"]+['\"]", " ", question))
    for word in [*quoted, *words]:
        text = word.strip(" .?!,;:")
        if not text or text.casefold() in STOPWORDS or text.casefold() in seen:
            continue
        seen.add(text.casefold())
        out.append(text)
    return out


@dataclass
class PipelineDeps:
    """Everything a run reads besides the question and the config."""
    catalog: DatabaseCatalog
    clients: Clients
    uqu_template: Optional[str] = None
    retriever: Optional[EntityRetriever] = None

    def get_retriever(self, config: PipelineConfig) -> EntityRetriever:
        if self.retriever is None:
            self.retriever = EntityRetriever(
                self.catalog,
                make_scorer(config.scorer, self.catalog, self.catalog.value_index, config.bm25_k1, config.bm25_b),
                self.clients.reranker,
                embedder=self.clients.embedder,
                cache=self.clients.embedding_cache,
                top_k_first=config.top_k_first,
                top_k_final=config.top_k_final,
                description_query=config.description_query,
            )
        return self.retriever


@dataclass
class PipelineRun:
    question: UserQuestion
    trace: RevisionTrace
    final: ExecutionOutcome
    decomposition: Optional[TaskDecomposition] = None
    keywords: Optional[KeywordSet] = None
    retrieval_keywords: List[str] = field(default_factory=list)
    keyword_hits: List[KeywordHits] = field(default_factory=list)
    entities: RetrievedEntities = field(default_factory=RetrievedEntities)
    uqu_prompt: str = ""
    uqu_responses: List[str] = field(default_factory=list)
    usage: UsageLedger = field(default_factory=UsageLedger)
    timings: Dict[str, float] = field(default_factory=dict)

    @property
    def final_sql(self) -> str:
        step = self.trace.final
        return step.candidate.sql if step else ""

    def to_trace(self) -> Dict[str, Any]:
        """One JSON-ready document with every prompt, response, SQL and outcome."""
        return {
            "question": self.question.model_dump(),
            "uqu": {
                "prompt": self.uqu_prompt,
                "responses": self.uqu_responses,
                "decomposition": self.decomposition.model_dump() if self.decomposition else None,
                "keywords": self.keywords.model_dump() if self.keywords else None,
            },
            "retrieval": {
                "keywords": self.retrieval_keywords,
                "hits": [h.to_dict() for h in self.keyword_hits],
                "entities": self.entities.model_dump(),
            },
            "generation": self.trace.model_dump(),
            "final": self.final.model_dump(),
            "usage": {
                "prompt_tokens": self.usage.prompt_tokens,
                "completion_tokens": self.usage.completion_tokens,
                "calls": self.usage.calls(),
            },
            "timings": dict(self.timings),
        }


def needs_revision(outcome: ExecutionOutcome, config: PipelineConfig, empty_revision_used: bool) -> bool:
    if outcome.status == "sql-error":
        return True
    return config.revise_on_empty and outcome.ok and not outcome.rows and not empty_revision_used


async def run_pipeline(
    question: UserQuestion,
    deps: PipelineDeps,
    config: PipelineConfig,
    ledger: Optional[UsageLedger] = None,
) -> PipelineRun:
    """Responses are recorded in `ledger` as they arrive, so a failed run still accounts for its calls."""
    clients = deps.clients
    catalog = deps.catalog
    ledger = ledger if ledger is not None else UsageLedger()
    timings: Dict[str, float] = {}
    cache, policy = clients.cache, config.retry

    decomposition: Optional[TaskDecomposition] = None
    keywords: Optional[KeywordSet] = None
    uqu_prompt, uqu_responses = "", []

    # ── UQU ──
    started = time.perf_counter()
    if config.use_uqu:
        try:
            understanding = await understand(
                question, clients.uqu, deps.uqu_template or load_template("uqu"),
                config.uqu, cache, policy, ledger,
            )
        except Exception as exc:
            raise PipelineError("uqu", exc) from exc
        decomposition, keywords = understanding.decomposition, understanding.keywords
        uqu_prompt, uqu_responses = understanding.prompt, understanding.raw_responses
        retrieval_keywords = keywords.retrieval_keywords()
    else:
        retrieval_keywords = content_words(question.question)
    timings["uqu"] = time.perf_counter() - started

    # ── Retrieval ──
    started = time.perf_counter()
    entities, hits = RetrievedEntities(), []
    if config.use_retrieval:
        try:
            entities, hits = await deps.get_retriever(config).retrieve(retrieval_keywords, question.question)
        except Exception as exc:
            raise PipelineError("retrieval", exc) from exc
    timings["retrieval"] = time.perf_counter() - started

    # ── Generation + revision ──
    started = time.perf_counter()
    try:
        prompt: GenerationPrompt = build_prompt(question, decomposition, entities, catalog)
        result = await generate_sql(clients.generation, prompt, config.generation, cache, policy, ledger)
    except Exception as exc:
        raise PipelineError("generation", exc) from exc

    outcome = execute_sql(catalog.db_path, result.candidate.sql, config.sql_timeout_s)
    steps = [TraceStep(candidate=result.candidate, outcome=outcome, prompt=result.prompt, response=result.response)]
    logger.info(f"[Generation] Initial SQL -> {outcome.status}")

    empty_revision_used = False
    revisions = 0
    while config.use_revision and revisions < config.revision_threshold and needs_revision(outcome, config, empty_revision_used):
        if outcome.ok:
            empty_revision_used = True
        try:
            result = await revise(
                clients.revision, steps[-1].candidate, outcome, prompt,
                config.revision, cache, policy, ledger,
            )
        except Exception as exc:
            raise PipelineError("revision", exc) from exc
        revisions += 1
        outcome = execute_sql(catalog.db_path, result.candidate.sql, config.sql_timeout_s)
        steps.append(TraceStep(candidate=result.candidate, outcome=outcome, prompt=result.prompt, response=result.response))
        logger.info(f"[Revision] Iteration {revisions} -> {outcome.status}")
    timings["generation"] = time.perf_counter() - started

    trace = RevisionTrace(steps=steps, final_status="ok" if outcome.ok else "exhausted")
    return PipelineRun(
        question=question,
        trace=trace,
        final=outcome,
        decomposition=decomposition,
        keywords=keywords,
        retrieval_keywords=retrieval_keywords,
        keyword_hits=hits,
        entities=entities,
        uqu_prompt=uqu_prompt,
        uqu_responses=uqu_responses,
        usage=ledger,
        timings=timings,
    )


def dry_run_prompts(question: UserQuestion, catalog: DatabaseCatalog, uqu_template: Optional[str] = None) -> Dict[str, str]:
    """The prompts a run would start with, built without calling any service."""
    prompt = build_prompt(question, None, RetrievedEntities(), catalog)
    return {
        "uqu": render_uqu_prompt(question, uqu_template or load_template("uqu")),
        "generation": prompt.render(),
    }
