"""Chat-completion client for OpenAI-compatible endpoints.

Only the non-streaming ``POST {base_url}/chat/completions`` shape is spoken;
local inference servers and proxies that expose it work unchanged.
"""

from __future__ import annotations

import json
import logging
import math
import os
import random
import threading
import time
from dataclasses import dataclass, field
from typing import Callable

import httpx

from .core import BracketRankError

logger = logging.getLogger(__name__)

RETRYABLE_STATUS = frozenset({429, 500, 502, 503, 504})
DEFAULT_MAX_REQUEST_CHARS = 400_000


class TransportError(BracketRankError):
    pass


class AuthError(BracketRankError):
    pass


class MalformedResponse(BracketRankError):
    pass


class RequestTooLarge(BracketRankError, ValueError):
    pass


@dataclass(frozen=True)
class EndpointConfig:
    base_url: str = "https://api.openai.com/v1"
    model_name: str = "gpt-4"
    api_key_env_var: str = "OPENAI_API_KEY"
    timeout_seconds: float = 120.0
    max_retries: int = 3
    backoff_base_seconds: float = 1.0
    temperature: float = 0.0
    max_request_chars: int = DEFAULT_MAX_REQUEST_CHARS

    def __post_init__(self) -> None:
        if self.timeout_seconds <= 0 or self.backoff_base_seconds <= 0:
            raise ValueError("timeout and backoff base must be positive")
        if self.max_retries < 0:
            raise ValueError("max_retries must be >= 0")
        if not 0.0 <= self.temperature <= 1.0:
            raise ValueError("temperature must lie in [0, 1]")

    @property
    def url(self) -> str:
        return self.base_url.rstrip("/") + "/chat/completions"


@dataclass
class CallStats:
    requests_sent: int = 0
    requests_failed: int = 0
    prompt_tokens_est: int = 0
    wall_time_seconds: float = 0.0
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def add(self, *, sent: int = 0, failed: int = 0, tokens: int = 0, seconds: float = 0.0) -> None:
        with self._lock:
            self.requests_sent += sent
            self.requests_failed += failed
            self.prompt_tokens_est += tokens
            self.wall_time_seconds += seconds


def estimate_tokens(text: str) -> int:
    """Rough token count: one token per four characters, rounded up."""
    return math.ceil(len(text) / 4)


def backoff_delay(attempt: int, base: float, rng: random.Random | None = None) -> float:
    """``base * 2**attempt`` with +/-20% jitter.

    Consecutive delays cannot decrease: the largest jittered value for one
    attempt (1.2x) stays below the smallest for the next (1.6x).
    """
    jitter = (rng or random).uniform(0.8, 1.2)
    return base * (2 ** attempt) * jitter


class ChatClient:
    """Thread-safe chat-completion client with retry and call accounting."""

    def __init__(
        self,
        config: EndpointConfig,
        *,
        http: httpx.Client | None = None,
        sleep: Callable[[float], None] = time.sleep,
        rng: random.Random | None = None,
    ):
        self.config = config
        self.stats = CallStats()
        self._http = http or httpx.Client(timeout=config.timeout_seconds)
        self._sleep = sleep
        self._rng = rng or random.Random()
        self._rng_lock = threading.Lock()

    def close(self) -> None:
        self._http.close()

    def __enter__(self) -> "ChatClient":
        return self

    def __exit__(self, *exc) -> None:
        self.close()

    def _headers(self) -> dict[str, str]:
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(self.config.api_key_env_var) if self.config.api_key_env_var else None
        if key:
            headers["Authorization"] = f"Bearer {key}"
        return headers

    def _payload(self, system_message: str, user_message: str) -> str:
        body = json.dumps({
            "model": self.config.model_name,
            "messages": [
                {"role": "system", "content": system_message},
                {"role": "user", "content": user_message},
            ],
            "temperature": self.config.temperature,
        })
        if len(body) > self.config.max_request_chars:
            raise RequestTooLarge(
                f"request body has {len(body)} chars, cap is {self.config.max_request_chars}"
            )
        return body

    def complete(self, system_message: str, user_message: str) -> str:
        if not system_message or not user_message:
            raise ValueError("system and user messages must be non-empty")
        body = self._payload(system_message, user_message)
        self.stats.add(tokens=estimate_tokens(system_message) + estimate_tokens(user_message))

        attempt = 0
        while True:
            started = time.perf_counter()
            failure: str
            try:
                response = self._http.post(
                    self.config.url,
                    content=body,
                    headers=self._headers(),
                    timeout=self.config.timeout_seconds,
                )
            except httpx.TransportError as exc:  # timeouts, refused connections
                self.stats.add(sent=1, failed=1, seconds=time.perf_counter() - started)
                failure = f"{type(exc).__name__}: {exc}"
            else:
                status = response.status_code
                if status == 200:
                    self.stats.add(sent=1, seconds=time.perf_counter() - started)
                    return _extract_content(response)
                self.stats.add(sent=1, failed=1, seconds=time.perf_counter() - started)
                if status in (401, 403):
                    raise AuthError(f"endpoint rejected credentials (HTTP {status})")
                if status not in RETRYABLE_STATUS:
                    raise TransportError(f"HTTP {status}: {response.text[:200]}")
                failure = f"HTTP {status}"

            if attempt >= self.config.max_retries:
                raise TransportError(
                    f"giving up after {attempt + 1} attempts; last failure: {failure}"
                )
            with self._rng_lock:
                delay = backoff_delay(attempt, self.config.backoff_base_seconds, self._rng)
            logger.warning("request failed (%s); retrying in %.2fs", failure, delay)
            self._sleep(delay)
            attempt += 1


def _extract_content(response: httpx.Response) -> str:
    try:
        content = response.json()["choices"][0]["message"]["content"]
    except (ValueError, KeyError, IndexError, TypeError) as exc:
        raise MalformedResponse(f"response lacks choices[0].message.content: {exc}") from exc
    if not isinstance(content, str):
        raise MalformedResponse("message content is not a string")
    return content


def complete(
    system_message: str,
    user_message: str,
    config: EndpointConfig,
    client: ChatClient | None = None,
) -> str:
    """One-shot convenience wrapper around :meth:`ChatClient.complete`."""
    if client is not None:
        return client.complete(system_message, user_message)
    with ChatClient(config) as owned:
        return owned.complete(system_message, user_message)
