"""Controlled search interface: the 9+1 injection protocol and follow-up routing."""

from __future__ import annotations

import enum
import logging
import random
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Protocol

from .dataset import ProductProfile
from .ecosystem.model import EvidenceGraph, EvidencePage
from .errors import HarnessError, SearchEnvironmentError
from .organic import OrganicProvider, OrganicResult
from .scorer import LexicalScorer, ResultDoc, Scorer, rank
from .snippet import MAX_LEN, clean_text, extract_snippet
from .textutil import contains_sequence, tokenize

logger = logging.getLogger(__name__)


class Origin(str, enum.Enum):
    ORGANIC = "Organic"
    SYNTHETIC = "Synthetic"


class Routing(str, enum.Enum):
    INITIAL_CONTROLLED = "InitialControlled"
    FOLLOWUP_GENERAL = "FollowupGeneral"
    FOLLOWUP_TARGET_SPECIFIC = "FollowupTargetSpecific"


class FollowupKind(str, enum.Enum):
    TARGET_SPECIFIC = "TargetSpecific"
    GENERAL = "General"


@dataclass(frozen=True)
class SearchResult:
    title: str
    link: str
    snippet: str
    rank: int
    origin: Origin
    round_index: int
    page_id: str | None = None

    def to_dict(self) -> dict:
        d = {"rank": self.rank, "title": self.title, "link": self.link, "snippet": self.snippet,
             "origin": self.origin.value}
        if self.page_id is not None:
            d["page_id"] = self.page_id
        return d

    @classmethod
    def from_dict(cls, d: dict, round_index: int) -> "SearchResult":
        return cls(d["title"], d["link"], d["snippet"], int(d["rank"]), Origin(d["origin"]), round_index,
                   d.get("page_id"))


@dataclass(frozen=True)
class SearchRound:
    round_index: int
    query: str
    results: tuple[SearchResult, ...]
    routing: Routing
    classification_source: str | None = None
    notes: tuple[str, ...] = ()

    @property
    def synthetic(self) -> list[SearchResult]:
        return [r for r in self.results if r.origin is Origin.SYNTHETIC]

    def result_at(self, rank_: int) -> SearchResult | None:
        for r in self.results:
            if r.rank == rank_:
                return r
        return None


@dataclass(frozen=True)
class EnvConstants:
    n: int = 10
    injection_rank: int = 5
    sample_size: int = 30
    topk: int = 10
    snippet_max: int = MAX_LEN

    def __post_init__(self):
        for name in ("n", "injection_rank", "sample_size", "topk", "snippet_max"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.injection_rank > self.n:
            raise ValueError("injection_rank must be <= n")


class BrandJudge(Protocol):
    def judge_brand_relevance(self, query: str, product: ProductProfile): ...


def lexical_target_specific(query: str, product: ProductProfile) -> bool:
    return contains_sequence(tokenize(query), tokenize(product.name))


def classify_followup(
    query: str,
    product: ProductProfile,
    judge: BrandJudge | None = None,
    *,
    on_judge_error: str = "lexical",
) -> tuple[FollowupKind, str]:
    """Return the follow-up class and where the decision came from (``lexical`` or ``judge``)."""
    if not query.strip():
        raise ValueError("empty query")
    lexical = FollowupKind.TARGET_SPECIFIC if lexical_target_specific(query, product) else FollowupKind.GENERAL
    if judge is None:
        return lexical, "lexical"
    try:
        verdict = judge.judge_brand_relevance(query, product)
    except HarnessError as exc:
        if on_judge_error != "lexical":
            raise
        logger.warning("brand judge failed (%s); using lexical rule", exc)
        return lexical, "lexical-fallback"
    kind = FollowupKind.TARGET_SPECIFIC if verdict.value else FollowupKind.GENERAL
    return kind, "judge"


@lru_cache(maxsize=8192)
def _clean(body: str, page_id: str):
    return clean_text(body, page_id)


def page_snippet(page: EvidencePage, query: str, max_len: int = MAX_LEN) -> str:
    return extract_snippet(_clean(page.body, page.page_id), query, max_len).text


def result_doc(page: EvidencePage, query: str, max_len: int = MAX_LEN) -> ResultDoc:
    return ResultDoc(page.page_id, page.title, page.url, page_snippet(page, query, max_len))


def _organic(query: str, organic: OrganicProvider, needed: int) -> list[OrganicResult]:
    results = organic.search(query)
    if len(results) < needed:
        raise SearchEnvironmentError(f"provider returned {len(results)} results for {query!r}, need {needed}")
    return results[:needed]


def _inject(query: str, k: int, organic_results: list[OrganicResult], page: EvidencePage,
            routing: Routing, const: EnvConstants, **extra) -> SearchRound:
    synthetic = SearchResult(page.title, page.url, page_snippet(page, query, const.snippet_max),
                             const.injection_rank, Origin.SYNTHETIC, k, page.page_id)
    results: list[SearchResult] = []
    organic_iter = iter(organic_results)
    for r in range(1, const.n + 1):
        if r == const.injection_rank:
            results.append(synthetic)
        else:
            o = next(organic_iter)
            results.append(SearchResult(o.title, o.link, o.snippet, r, Origin.ORGANIC, k))
    return SearchRound(k, query, tuple(results), routing, **extra)


def initial_round(query: str, graph: EvidenceGraph, organic: OrganicProvider,
                  const: EnvConstants = EnvConstants(), *, round_index: int = 1) -> SearchRound:
    """Nine organic results around the entry page, which sits at the injection rank."""
    organic_results = _organic(query, organic, const.n - 1)
    return _inject(query, round_index, organic_results, graph.entry, Routing.INITIAL_CONTROLLED, const)


def sample_candidates(graph: EvidenceGraph, rng: random.Random, sample_size: int) -> list[str]:
    pool = sorted(graph.pages)
    if len(pool) <= sample_size:
        return pool
    return rng.sample(pool, sample_size)


def followup_round(
    query: str,
    graph: EvidenceGraph,
    organic: OrganicProvider,
    scorer: Scorer,
    rng: random.Random,
    kind: FollowupKind,
    const: EnvConstants = EnvConstants(),
    *,
    round_index: int = 2,
    classification_source: str | None = None,
) -> SearchRound:
    if not graph.pages:
        raise SearchEnvironmentError("empty support-page pool")
    if kind is FollowupKind.TARGET_SPECIFIC:
        docs = [result_doc(p, query, const.snippet_max) for p in graph.pages.values()]
        ranked = rank(query, docs, scorer)[: const.topk]
        results = tuple(
            SearchResult(sd.doc.title, sd.doc.url, sd.doc.snippet, i, Origin.SYNTHETIC, round_index, sd.doc.page_id)
            for i, sd in enumerate(ranked, start=1)
        )
        return SearchRound(round_index, query, results, Routing.FOLLOWUP_TARGET_SPECIFIC, classification_source)

    candidates = sample_candidates(graph, rng, const.sample_size)
    docs = [result_doc(graph.pages[pid], query, const.snippet_max) for pid in candidates]
    best = rank(query, docs, scorer)[0]
    organic_results = _organic(query, organic, const.n - 1)
    return _inject(query, round_index, organic_results, graph.pages[best.doc.page_id],
                   Routing.FOLLOWUP_GENERAL, const, classification_source=classification_source)


class SearchEnvironment:
    """Per-episode search tool: first call is the controlled initial round, later calls are routed."""

    def __init__(
        self,
        graph: EvidenceGraph,
        organic: OrganicProvider,
        *,
        scorer: Scorer | None = None,
        const: EnvConstants = EnvConstants(),
        brand_judge: BrandJudge | None = None,
        on_judge_error: str = "lexical",
        rng: random.Random | None = None,
    ):
        self.graph = graph
        self.organic = organic
        self.scorer = scorer or LexicalScorer()
        self.const = const
        self.brand_judge = brand_judge
        self.on_judge_error = on_judge_error
        self.rng = rng or random.Random(0)
        self.rounds_issued = 0

    def search(self, query: str) -> SearchRound:
        k = self.rounds_issued + 1
        if k == 1:
            rnd = initial_round(query, self.graph, self.organic, self.const, round_index=1)
        else:
            kind, source = classify_followup(query, self.graph.product, self.brand_judge,
                                             on_judge_error=self.on_judge_error)
            rnd = followup_round(query, self.graph, self.organic, self.scorer, self.rng, kind, self.const,
                                 round_index=k, classification_source=source)
        self.rounds_issued = k
        return rnd
