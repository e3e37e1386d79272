"""Query-document relevance scores for ecosystem-local ranking and follow-up injection."""

from __future__ import annotations

import logging
import math
import os
import threading
import time
from collections import Counter
from dataclasses import dataclass
from typing import Protocol, Sequence

import httpx

from .errors import HarnessError, ProtocolError, TransportError
from .textutil import tokenize

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ResultDoc:
    page_id: str
    title: str
    url: str
    snippet: str

    def __post_init__(self):
        if len(self.snippet) > 150:
            raise ValueError("snippet exceeds 150 characters")

    @property
    def text(self) -> str:
        return f"{self.title}\n{self.url}\n{self.snippet}"


@dataclass(frozen=True)
class ScoredDoc:
    doc: ResultDoc
    score: float


class Scorer(Protocol):
    name: str

    def score(self, query: str, doc: ResultDoc) -> float: ...


class ScoringError(HarnessError):
    def __init__(self, page_id: str, cause: Exception):
        self.page_id = page_id
        self.cause = cause
        super().__init__(f"scoring {page_id} failed: {cause}")


def cosine(a: Counter, b: Counter) -> float:
    if not a or not b:
        return 0.0
    dot = sum(v * b.get(k, 0) for k, v in a.items())
    if not dot:
        return 0.0
    na = math.sqrt(sum(v * v for v in a.values()))
    nb = math.sqrt(sum(v * v for v in b.values()))
    return dot / (na * nb)


class LexicalScorer:
    """Cosine similarity of term-frequency vectors: query tokens vs. title + snippet tokens."""

    name = "lexical"

    def score(self, query: str, doc: ResultDoc) -> float:
        return cosine(Counter(tokenize(query)), Counter(tokenize(f"{doc.title} {doc.snippet}")))


class RemoteScorer:
    """Client for a generic reranker endpoint.

    Request: ``POST {"pairs": [{"query": ..., "passage": ...}, ...]}``.
    Response: ``{"scores": [float, ...]}`` aligned with the pairs.
    The bearer token is read from the environment variable ``token_env``.
    """

    name = "remote"

    def __init__(
        self,
        endpoint: str,
        *,
        token_env: str = "RERANKER_TOKEN",
        timeout: float = 30.0,
        max_retries: int = 2,
        backoff: float = 0.5,
        max_connections: int = 8,
        transport: httpx.BaseTransport | None = None,
    ):
        headers = {"Content-Type": "application/json"}
        token = os.environ.get(token_env)
        if token:
            headers["Authorization"] = f"Bearer {token}"
        self.endpoint = endpoint
        self.max_retries = max_retries
        self.backoff = backoff
        self._http = httpx.Client(
            timeout=timeout,
            headers=headers,
            transport=transport,
            limits=httpx.Limits(max_connections=max_connections),
        )

    def score_many(self, query: str, docs: Sequence[ResultDoc]) -> list[float]:
        body = {"pairs": [{"query": query, "passage": d.text} for d in docs]}
        last: Exception | None = None
        for attempt in range(self.max_retries + 1):
            try:
                resp = self._http.post(self.endpoint, json=body)
                resp.raise_for_status()
                data = resp.json()
                break
            except (httpx.TransportError, httpx.HTTPStatusError) as exc:
                last = exc
                if attempt < self.max_retries:
                    time.sleep(self.backoff * (2**attempt))
        else:
            raise TransportError(f"reranker unreachable: {last}") from last
        scores = data.get("scores") if isinstance(data, dict) else None
        if not isinstance(scores, list) or len(scores) != len(docs):
            raise ProtocolError(f"reranker returned {data!r}")
        out = []
        for s in scores:
            value = float(s)
            if not math.isfinite(value):
                raise ProtocolError(f"non-finite reranker score {s!r}")
            out.append(value)
        return out

    def score(self, query: str, doc: ResultDoc) -> float:
        return self.score_many(query, [doc])[0]


class FallbackScorer:
    """Wraps a remote scorer; on transport failure either re-raises or uses the lexical scorer.

    ``fallbacks`` counts degraded calls so the episode log can record them.
    """

    def __init__(self, primary: Scorer, policy: str = "fail"):
        if policy not in ("fail", "lexical"):
            raise ValueError(f"unknown fallback policy {policy!r}")
        self.primary = primary
        self.policy = policy
        self.lexical = LexicalScorer()
        self.name = primary.name
        self.fallbacks = 0
        self._lock = threading.Lock()

    def score(self, query: str, doc: ResultDoc) -> float:
        try:
            return self.primary.score(query, doc)
        except TransportError:
            if self.policy == "fail":
                raise
            with self._lock:
                self.fallbacks += 1
            logger.warning("reranker unavailable, lexical fallback for %s", doc.page_id)
            return self.lexical.score(query, doc)


def rank(query: str, docs: Sequence[ResultDoc], scorer: Scorer) -> list[ScoredDoc]:
    """Descending by score; ties broken by page_id."""
    if not docs:
        raise ValueError("rank() needs at least one document")
    scored = []
    for d in docs:
        try:
            s = scorer.score(query, d)
        except HarnessError as exc:
            raise ScoringError(d.page_id, exc) from exc
        scored.append(ScoredDoc(d, s))
    return sorted(scored, key=lambda sd: (-sd.score, sd.doc.page_id))
