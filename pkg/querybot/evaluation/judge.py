"""LLM-as-judge scoring of task decompositions on a five-point scale"""
import logging
import re
from typing import Optional

from querybot.clients.cache import ResponseCache
from querybot.clients.llm import ChatRequest, LlmClient, UsageLedger, llm_complete
from querybot.config import EndpointConfig, RetryPolicy
from querybot.errors import JudgeScoreError
from querybot.prompts import load_template, render
from querybot.uqu.models import TaskDecomposition

logger = logging.getLogger(__name__)

SCORE_MIN, SCORE_MAX = 1.0, 5.0
_NUMBER = re.compile(r"[-+]?\d+(?:\.\d+)?")
_LABELLED = re.compile(r"\bscore\s*[:=]?\s*([-+]?\d+(?:\.\d+)?)", re.IGNORECASE)
_OUT_OF = re.compile(r"(?:/|\bout of)\s*5(?:\.0+)?(?!\.?\d)", re.IGNORECASE)

REASK_NOTE = "\n\nReply with a single number between 1 and 5 and nothing else."


def parse_score(text: str) -> float:
    """A labelled "score: N" wins; otherwise the last number in [1, 5].

    "/5" and "out of 5" denominators are not candidates.
    """
    text = text or ""
    labelled = _LABELLED.search(text)
    if labelled is not None:
        candidates = [float(labelled.group(1))]
    else:
        candidates = [float(n) for n in _NUMBER.findall(_OUT_OF.sub(" ", text))]
    if not candidates:
        raise JudgeScoreError("no score in judge reply", raw=text)
    in_range = [c for c in candidates if SCORE_MIN <= c <= SCORE_MAX]
    if not in_range:
        raise JudgeScoreError(f"judge score {candidates[-1]} outside [1, 5]", raw=text)
    return in_range[-1]


async def judge_score(
    llm: LlmClient,
    candidate: TaskDecomposition,
    gold: TaskDecomposition,
    rubric: Optional[str] = None,
    question: str = "",
    endpoint: Optional[EndpointConfig] = None,
    cache: Optional[ResponseCache] = None,
    policy: Optional[RetryPolicy] = None,
    ledger: Optional[UsageLedger] = None,
) -> float:
    """Raw judge score; one re-ask when the reply has no usable number."""
    endpoint = endpoint or EndpointConfig(model_id=llm.model_id)
    prompt = render(
        rubric or load_template("judge"),
        question=question,
        gold=gold.render(),
        candidate=candidate.render(),
    )
    request = ChatRequest(
        model_id=endpoint.model_id,
        user=prompt,
        temperature=endpoint.temperature,
        max_tokens=endpoint.max_tokens,
    )
    response = await llm_complete(request, llm, cache, policy, ledger, stage="judge")
    try:
        return parse_score(response.text)
    except JudgeScoreError as exc:
        logger.warning(f"[Eval] Judge reply unusable ({exc}), asking again")
    retry = request.model_copy(update={"user": prompt + REASK_NOTE, "temperature": 0.0})
    response = await llm_complete(retry, llm, cache, policy, ledger, stage="judge")
    return parse_score(response.text)
