"""Minimal client for OpenAI-compatible chat-completions endpoints."""

from __future__ import annotations

import logging
import os
import time
from dataclasses import dataclass

import httpx

from .errors import BackendMalformedOutput, BackendUnreachable

log = logging.getLogger(__name__)

API_KEY_ENV = "ODAL_API_KEY"


@dataclass(frozen=True)
class ChatResult:
    text: str
    completion_tokens: int | None


class ChatCompletionsClient:
    """POSTs to {base_url}/chat/completions with bearer auth from the
    environment.  Retries transport failures with a short backoff."""

    def __init__(
        self,
        base_url: str,
        model: str = "default",
        api_key_env: str = API_KEY_ENV,
        timeout: float = 60.0,
        max_retries: int = 2,
        transport: httpx.BaseTransport | None = None,
    ) -> None:
        self.base_url = base_url.rstrip("/")
        self.model = model
        self.api_key = os.environ.get(api_key_env, "")
        self.max_retries = max_retries
        self._client = httpx.Client(timeout=timeout, transport=transport)

    def complete(
        self,
        messages: list[dict],
        temperature: float = 0.0,
        max_tokens: int | None = None,
    ) -> ChatResult:
        payload: dict = {
            "model": self.model,
            "messages": messages,
            "temperature": temperature,
        }
        if max_tokens is not None:
            payload["max_tokens"] = max_tokens
        headers = {}
        if self.api_key:
            headers["Authorization"] = f"Bearer {self.api_key}"
        last_error: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._client.post(
                    f"{self.base_url}/chat/completions", json=payload, headers=headers
                )
                resp.raise_for_status()
                doc = resp.json()
                text = doc["choices"][0]["message"]["content"]
                usage = doc.get("usage", {})
                tokens = usage.get("completion_tokens")
                return ChatResult(
                    text=text, completion_tokens=int(tokens) if tokens is not None else None
                )
            except (httpx.HTTPError, OSError) as exc:
                last_error = exc
                log.warning("chat request failed (attempt %d): %s", attempt + 1, exc)
                time.sleep(min(0.2 * 2**attempt, 2.0))
            except (KeyError, IndexError, TypeError, ValueError) as exc:
                raise BackendMalformedOutput(
                    f"chat completion response malformed: {exc}"
                ) from exc
        raise BackendUnreachable(
            f"chat endpoint {self.base_url} unreachable: {last_error}"
        )

    def close(self) -> None:
        self._client.close()
