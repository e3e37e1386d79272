"""Chat-completion client (OpenAI-compatible wire format) plus record/replay cassettes."""

from __future__ import annotations

import hashlib
import json
import logging
import os
import threading
import time
from pathlib import Path
from typing import Any, Protocol

import httpx

from .errors import ProtocolError, TransportError

logger = logging.getLogger(__name__)


class ChatBackend(Protocol):
    model: str

    def complete(
        self,
        messages: list[dict[str, Any]],
        *,
        tools: list[dict[str, Any]] | None = None,
        tool_choice: str | None = None,
    ) -> dict[str, Any]:
        """Return the assistant message dict (``content`` and optional ``tool_calls``)."""
        ...


class ChatClient:
    """Minimal client for any ``/chat/completions`` endpoint with tool calling.

    The API key is read from the environment variable named by ``api_key_env``;
    it is never accepted from configuration files.
    """

    def __init__(
        self,
        endpoint: str,
        model: str,
        *,
        api_key_env: str = "OPENAI_API_KEY",
        temperature: float = 0.0,
        timeout: float = 120.0,
        max_retries: int = 3,
        backoff: float = 1.0,
        transport: httpx.BaseTransport | None = None,
    ):
        self.endpoint = endpoint.rstrip("/")
        self.model = model
        self.temperature = temperature
        self.max_retries = max_retries
        self.backoff = backoff
        headers = {"Content-Type": "application/json"}
        key = os.environ.get(api_key_env)
        if key:
            headers["Authorization"] = f"Bearer {key}"
        self._http = httpx.Client(timeout=timeout, headers=headers, transport=transport)

    def _url(self) -> str:
        if self.endpoint.endswith("/chat/completions"):
            return self.endpoint
        return self.endpoint + "/chat/completions"

    def complete(self, messages, *, tools=None, tool_choice=None):
        body: dict[str, Any] = {
            "model": self.model,
            "messages": messages,
            "temperature": self.temperature,
        }
        if tools:
            body["tools"] = tools
            if tool_choice:
                body["tool_choice"] = tool_choice
        last_exc: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._http.post(self._url(), json=body)
                if resp.status_code >= 500 or resp.status_code == 429:
                    raise httpx.HTTPStatusError(
                        f"server returned {resp.status_code}", request=resp.request, response=resp
                    )
                resp.raise_for_status()
                data = resp.json()
                break
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last_exc = exc
                status = getattr(getattr(exc, "response", None), "status_code", None)
                if status is not None and status < 500 and status != 429:
                    raise TransportError(f"chat backend rejected request: {exc}") from exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
        else:
            raise TransportError(f"chat backend unreachable after retries: {last_exc}") from last_exc
        try:
            return data["choices"][0]["message"]
        except (KeyError, IndexError, TypeError) as exc:
            raise ProtocolError(f"unexpected chat response shape: {data!r}") from exc


def request_key(model: str, messages, tools=None, tool_choice=None) -> str:
    payload = json.dumps(
        {"model": model, "messages": messages, "tools": tools, "tool_choice": tool_choice},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(payload.encode("utf-8")).hexdigest()


class Cassette:
    """JSON file mapping request hashes to recorded assistant messages."""

    def __init__(self, path: str | Path):
        self.path = Path(path)
        self._lock = threading.Lock()
        self.entries: dict[str, dict[str, Any]] = {}
        if self.path.exists():
            self.entries = json.loads(self.path.read_text(encoding="utf-8"))

    def get(self, key: str) -> dict[str, Any] | None:
        return self.entries.get(key)

    def put(self, key: str, message: dict[str, Any]) -> None:
        with self._lock:
            self.entries[key] = message
            self.path.parent.mkdir(parents=True, exist_ok=True)
            self.path.write_text(
                json.dumps(self.entries, indent=2, sort_keys=True, ensure_ascii=False) + "\n",
                encoding="utf-8",
            )


class ReplayChatClient:
    """Serves recorded responses; with ``inner`` set, records misses instead of failing."""

    def __init__(self, cassette: Cassette | str | Path, model: str = "replay", inner: ChatBackend | None = None):
        self.cassette = cassette if isinstance(cassette, Cassette) else Cassette(cassette)
        self.inner = inner
        self.model = inner.model if inner is not None else model

    def complete(self, messages, *, tools=None, tool_choice=None):
        key = request_key(self.model, messages, tools, tool_choice)
        hit = self.cassette.get(key)
        if hit is not None:
            return hit
        if self.inner is None:
            raise TransportError(f"no recorded response for request {key[:12]} in {self.cassette.path}")
        message = self.inner.complete(messages, tools=tools, tool_choice=tool_choice)
        self.cassette.put(key, message)
        logger.info("recorded chat response %s", key[:12])
        return message
