"""Shared HTTP plumbing: bounded exponential backoff around async calls"""
import asyncio
import logging
from typing import Any, Awaitable, Callable, Dict, List, Optional, Tuple, TypeVar

import httpx

from querybot.config import RetryPolicy
from querybot.errors import TransportError

logger = logging.getLogger(__name__)

T = TypeVar("T")

Sleep = Callable[[float], Awaitable[Any]]


def is_retryable_status(status: int) -> bool:
    return status == 429 or status >= 500


async def with_retries(
    call: Callable[[], Awaitable[T]],
    policy: RetryPolicy,
    label: str,
    sleep: Sleep = asyncio.sleep,
) -> Tuple[T, List[str]]:
    """
    Run `call` up to policy.max_attempts times.

    Returns (result, attempt log). Non-retryable TransportErrors stop the loop
    at once; anything else transport-like is retried with backoff.
    """
    attempts: List[str] = []
    for attempt in range(1, policy.max_attempts + 1):
        try:
            result = await call()
            attempts.append(f"{attempt}: ok")
            return result, attempts
        except TransportError as exc:
            attempts.append(f"{attempt}: {exc.reason}")
            if not exc.retryable:
                raise TransportError(f"{label} failed: {exc.reason}", attempts, retryable=False) from exc
        except (httpx.TransportError, httpx.TimeoutException) as exc:
            attempts.append(f"{attempt}: {type(exc).__name__}: {exc}")

        if attempt < policy.max_attempts:
            delay = policy.delay(attempt)
            logger.warning(f"[LLM] {label}: attempt {attempt} failed, retrying in {delay:.1f}s")
            await sleep(delay)

    raise TransportError(f"{label} failed after {policy.max_attempts} attempt(s)", attempts)


async def post_json_once(
    client: httpx.AsyncClient,
    url: str,
    payload: Dict[str, Any],
    api_key: Optional[str],
) -> Dict[str, Any]:
    """One POST; non-200 replies become TransportError flagged retryable or not."""
    headers = {"Content-Type": "application/json"}
    if api_key:
        headers["Authorization"] = f"Bearer {api_key}"
    resp = await client.post(url, json=payload, headers=headers)
    if resp.status_code != 200:
        raise TransportError(
            f"HTTP {resp.status_code}: {resp.text[:200]}",
            retryable=is_retryable_status(resp.status_code),
        )
    try:
        return resp.json()
    except ValueError as exc:
        raise TransportError(f"non-JSON reply from {url}", retryable=False) from exc


async def post_json(
    client: httpx.AsyncClient,
    url: str,
    payload: Dict[str, Any],
    api_key: Optional[str],
    policy: RetryPolicy,
    sleep: Sleep = asyncio.sleep,
) -> Tuple[Dict[str, Any], List[str]]:
    """POST a JSON body and return (decoded reply, attempt log), retrying per policy."""
    return await with_retries(
        lambda: post_json_once(client, url, payload, api_key), policy, f"POST {url}", sleep
    )
