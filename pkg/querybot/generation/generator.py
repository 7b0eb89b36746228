"""Ask the model for SQL, pull the statement out of its reply, and revise failures"""
import logging
import re
import sqlite3
from dataclasses import dataclass
from typing import Optional

from querybot.clients.cache import ResponseCache
from querybot.clients.llm import ChatRequest, LlmClient, UsageLedger, llm_complete
from querybot.config import MAX_REVISION_THRESHOLD, EndpointConfig, RetryPolicy
from querybot.errors import RevisionRefusedError, SqlExtractionError
from querybot.generation.models import ExecutionOutcome, GenerationPrompt, SqlCandidate
from querybot.prompts import load_template, render

logger = logging.getLogger(__name__)

_FENCED = re.compile(r"```[ \t]*([A-Za-z0-9_-]*)[ \t]*\n?(.*?)```", re.DOTALL)
_BARE_START = re.compile(r"^[ \t]*(SELECT|WITH)\b", re.IGNORECASE | re.MULTILINE)

REASK_NOTE = "\n\nYour previous reply contained no SQL statement. Answer with one SQLite query in a ```sql code block."


def first_statement(text: str) -> str:
    """First complete statement of `text`; later statements are dropped with a warning."""
    for i, ch in enumerate(text):
        if ch == ";" and sqlite3.complete_statement(text[: i + 1]):
            rest = text[i + 1 :].strip()
            if rest.strip(";").strip():
                logger.warning("[Generation] Reply holds more than one statement; only the first is used")
            return text[:i].strip()
    return text.strip()


def extract_sql(text: str) -> str:
    """
    One SQL statement from a model reply.

    A fenced block (```sql preferred) wins; otherwise the text from the first
    line starting with SELECT or WITH, cut at the first blank line when the
    statement has no terminating semicolon.
    """
    blocks = [(lang.lower(), body) for lang, body in _FENCED.findall(text or "")]
    body: Optional[str] = None
    for lang, content in blocks:
        if lang == "sql" and content.strip():
            body = content
            break
    if body is None:
        for _lang, content in blocks:
            if _BARE_START.search(content):
                body = content
                break
    if body is None:
        match = _BARE_START.search(text or "")
        if match is None:
            raise SqlExtractionError("no SQL statement found in model reply", raw=text or "")
        body = text[match.start():]
        if ";" not in body:
            body = re.split(r"\n[ \t]*\n|```", body, maxsplit=1)[0]

    sql = first_statement(body)
    if not sql:
        raise SqlExtractionError("empty SQL statement in model reply", raw=text or "")
    return sql


@dataclass
class GenerationResult:
    candidate: SqlCandidate
    prompt: str
    response: str


async def _ask_for_sql(
    llm: LlmClient,
    prompt_text: str,
    endpoint: EndpointConfig,
    stage: str,
    cache: Optional[ResponseCache],
    policy: Optional[RetryPolicy],
    ledger: Optional[UsageLedger],
) -> tuple[str, str]:
    request = ChatRequest(
        model_id=endpoint.model_id,
        user=prompt_text,
        temperature=endpoint.temperature,
        max_tokens=endpoint.max_tokens,
    )
    response = await llm_complete(request, llm, cache, policy, ledger, stage=stage)
    try:
        return extract_sql(response.text), response.text
    except SqlExtractionError:
        logger.warning(f"[Generation] {stage}: no SQL in reply, asking again")
    retry = request.model_copy(update={"user": prompt_text + REASK_NOTE, "temperature": 0.0})
    response = await llm_complete(retry, llm, cache, policy, ledger, stage=stage)
    return extract_sql(response.text), response.text


async def generate_sql(
    llm: LlmClient,
    prompt: GenerationPrompt,
    endpoint: Optional[EndpointConfig] = None,
    cache: Optional[ResponseCache] = None,
    policy: Optional[RetryPolicy] = None,
    ledger: Optional[UsageLedger] = None,
    template: Optional[str] = None,
) -> GenerationResult:
    """Initial candidate (iteration 0); one re-ask when no SQL can be extracted."""
    endpoint = endpoint or EndpointConfig(model_id=llm.model_id)
    prompt_text = prompt.render(template)
    sql, raw = await _ask_for_sql(llm, prompt_text, endpoint, "generation", cache, policy, ledger)
    return GenerationResult(SqlCandidate(sql=sql, iteration=0, provenance="initial"), prompt_text, raw)


def render_revision_prompt(
    failed: SqlCandidate,
    outcome: ExecutionOutcome,
    prompt_ctx: GenerationPrompt,
    template: Optional[str] = None,
) -> str:
    return render(
        template or load_template("revision"),
        schema=prompt_ctx.schema_section,
        reasoning=prompt_ctx.reasoning_section,
        constraints=prompt_ctx.constraints_section,
        sql=failed.sql,
        error=outcome.feedback,
    )


async def revise(
    llm: LlmClient,
    failed: SqlCandidate,
    outcome: ExecutionOutcome,
    prompt_ctx: GenerationPrompt,
    endpoint: Optional[EndpointConfig] = None,
    cache: Optional[ResponseCache] = None,
    policy: Optional[RetryPolicy] = None,
    ledger: Optional[UsageLedger] = None,
    cap: int = MAX_REVISION_THRESHOLD,
    template: Optional[str] = None,
) -> GenerationResult:
    """Feed the failed SQL and its error back; the new candidate is one iteration further."""
    if failed.iteration >= cap:
        raise RevisionRefusedError(f"candidate at iteration {failed.iteration} has reached the revision cap of {cap}")
    endpoint = endpoint or EndpointConfig(model_id=llm.model_id)
    prompt_text = render_revision_prompt(failed, outcome, prompt_ctx, template)
    sql, raw = await _ask_for_sql(llm, prompt_text, endpoint, "revision", cache, policy, ledger)
    logger.info(f"[Revision] Iteration {failed.iteration + 1}: revised after '{outcome.feedback[:80]}'")
    return GenerationResult(
        SqlCandidate(sql=sql, iteration=failed.iteration + 1, provenance="revised"),
        prompt_text,
        raw,
    )
