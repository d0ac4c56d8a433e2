"""Refinement through an OpenAI-compatible chat-completions endpoint.

Every failure (timeout, refused connection, non-2xx status, malformed or empty
body) degrades to the caller's fallback text; a batch never aborts.
"""
from __future__ import annotations

import logging
import os
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Sequence

import httpx

from ..prompt import INSTRUCTION

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EndpointConfig:
    url: str  # base URL, e.g. http://localhost:8000/v1
    model: str
    api_key_env: str | None = "OPENAI_API_KEY"
    timeout: float = 30.0
    max_retries: int = 1
    retry_backoff: float = 0.1
    max_concurrency: int = 8
    temperature: float = 0.0

    @property
    def completions_url(self) -> str:
        base = self.url.rstrip("/")
        return base if base.endswith("/chat/completions") else base + "/chat/completions"

    def headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(self.api_key_env, "") if self.api_key_env else ""
        if token:
            headers["Authorization"] = f"Bearer {token}"
        return headers


@dataclass(frozen=True)
class ChatOutcome:
    text: str
    source: str  # "chat" or "fallback"
    error: str | None = None


def build_request(instance_input: str, endpoint: EndpointConfig) -> dict:
    return {
        "model": endpoint.model,
        "messages": [
            {"role": "system", "content": INSTRUCTION},
            {"role": "user", "content": instance_input},
        ],
        "temperature": endpoint.temperature,
    }


def _parse(body: dict) -> str:
    text = body["choices"][0]["message"]["content"]
    if not isinstance(text, str):
        raise ValueError("response content is not a string")
    text = text.strip()
    if not text:
        raise ValueError("empty response")
    return text


def chat_refine(
    instance_input: str,
    endpoint: EndpointConfig,
    fallback: str,
    client: httpx.Client | None = None,
) -> ChatOutcome:
    own = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    payload = build_request(instance_input, endpoint)
    error = "no attempt made"
    try:
        for attempt in range(endpoint.max_retries + 1):
            try:
                resp = client.post(endpoint.completions_url, json=payload, headers=endpoint.headers())
                resp.raise_for_status()
                return ChatOutcome(_parse(resp.json()), "chat")
            except httpx.HTTPStatusError as exc:
                error = f"status {exc.response.status_code}"
                if exc.response.status_code < 500:
                    break
            except httpx.HTTPError as exc:
                error = f"{type(exc).__name__}: {exc}"
            except (ValueError, KeyError, IndexError, TypeError) as exc:
                error = f"unparseable response: {exc!r}"
                break
            if attempt < endpoint.max_retries:
                time.sleep(endpoint.retry_backoff * (attempt + 1))
    finally:
        if own:
            client.close()
    log.warning("chat refinement failed, using fallback: %s", error)
    return ChatOutcome(fallback, "fallback", error)


def chat_refine_batch(
    inputs: Sequence[str],
    fallbacks: Sequence[str],
    endpoint: EndpointConfig,
    client: httpx.Client | None = None,
) -> list[ChatOutcome]:
    """Refine a batch with at most ``endpoint.max_concurrency`` requests in flight.

    Results come back in input order.
    """
    if len(inputs) != len(fallbacks):
        raise ValueError("inputs and fallbacks differ in length")
    own = client is None
    client = client or httpx.Client(timeout=endpoint.timeout)
    try:
        with ThreadPoolExecutor(max_workers=max(1, endpoint.max_concurrency)) as pool:
            return list(pool.map(lambda a: chat_refine(a[0], endpoint, a[1], client), zip(inputs, fallbacks)))
    finally:
        if own:
            client.close()
