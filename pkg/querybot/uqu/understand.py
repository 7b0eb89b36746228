"""Prompted question understanding: decomposition + keyword extraction"""
import logging
from dataclasses import dataclass, field
from typing import List, Optional

from querybot.clients.cache import ResponseCache
from querybot.clients.llm import ChatRequest, LlmClient, UsageLedger, llm_complete
from querybot.config import EndpointConfig, RetryPolicy
from querybot.errors import UquParseError
from querybot.prompts import render, require_placeholders
from querybot.uqu.models import KeywordSet, TaskDecomposition, UserQuestion
from querybot.uqu.parser import parse_response

logger = logging.getLogger(__name__)

REASK_NOTE = (
    "\n\nYour previous reply could not be used ({error}). "
    "Reply with only the JSON object with keys main_task, sub_task, object and implementation."
)


@dataclass
class Understanding:
    decomposition: TaskDecomposition
    keywords: KeywordSet
    prompt: str
    raw_responses: List[str] = field(default_factory=list)


def render_uqu_prompt(question: UserQuestion, template: str) -> str:
    require_placeholders(template, ("question", "hint"), "UQU template")
    return render(template, question=question.question, hint=question.hint)


async def understand(
    question: UserQuestion,
    llm: LlmClient,
    template: str,
    endpoint: Optional[EndpointConfig] = None,
    cache: Optional[ResponseCache] = None,
    policy: Optional[RetryPolicy] = None,
    ledger: Optional[UsageLedger] = None,
) -> Understanding:
    """
    Ask the model for a decomposition and keyword set.

    One re-ask at temperature 0 on unparseable output, then UquParseError
    carrying the last raw reply.
    """
    endpoint = endpoint or EndpointConfig(model_id=llm.model_id)
    prompt = render_uqu_prompt(question, template)
    raw_responses: List[str] = []

    request = ChatRequest(
        model_id=endpoint.model_id,
        user=prompt,
        temperature=endpoint.temperature,
        max_tokens=endpoint.max_tokens,
    )
    response = await llm_complete(request, llm, cache, policy, ledger, stage="uqu")
    raw_responses.append(response.text)
    try:
        decomposition, keywords = parse_response(response.text)
    except UquParseError as first:
        logger.warning(f"[UQU] Unparseable reply, asking again: {first}")
        retry = request.model_copy(update={
            "user": prompt + REASK_NOTE.format(error=first),
            "temperature": 0.0,
        })
        response = await llm_complete(retry, llm, cache, policy, ledger, stage="uqu")
        raw_responses.append(response.text)
        try:
            decomposition, keywords = parse_response(response.text)
        except UquParseError as second:
            raise UquParseError(
                "model output unparseable after one re-ask",
                raw=response.text,
                violations=second.violations or [str(second)],
            ) from second

    logger.info(
        f"[UQU] {len(decomposition.main_tasks)} main / {len(decomposition.sub_tasks)} sub task(s), "
        f"{len(keywords.objects)} object(s), {len(keywords.implementations)} implementation(s)"
    )
    return Understanding(decomposition, keywords, prompt, raw_responses)
