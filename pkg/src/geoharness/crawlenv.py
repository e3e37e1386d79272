"""Crawl tool: resolves observed links to content and tracks where each link was first seen."""

from __future__ import annotations

import enum
import logging
from dataclasses import dataclass
from typing import Iterator, Union

from .ecosystem.model import EvidenceGraph
from .errors import ContractViolation
from .markdown import extract_links
from .organic import FetchError, PageStore
from .searchenv import SearchRound

logger = logging.getLogger(__name__)

__all__ = ["extract_links", "Provenance", "ObservedLink", "ObservedLinks", "CrawledPage", "crawl",
           "register_observations"]


class Provenance(str, enum.Enum):
    SEARCH_RESULT = "SearchResult"
    IN_PAGE = "InPage"


@dataclass(frozen=True)
class ObservedLink:
    url: str
    provenance: Provenance
    first_observed_step: int
    round_index: int | None = None
    rank: int | None = None
    source_url: str | None = None

    def to_dict(self) -> dict:
        d = {"url": self.url, "provenance": self.provenance.value, "first_observed_step": self.first_observed_step}
        if self.provenance is Provenance.SEARCH_RESULT:
            d.update(round_index=self.round_index, rank=self.rank)
        else:
            d["source_url"] = self.source_url
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ObservedLink":
        return cls(d["url"], Provenance(d["provenance"]), int(d["first_observed_step"]),
                   d.get("round_index"), d.get("rank"), d.get("source_url"))


class ObservedLinks:
    """Insertion-ordered, grow-only set of observed links; first observation wins."""

    def __init__(self):
        self._links: dict[str, ObservedLink] = {}

    def add(self, link: ObservedLink) -> bool:
        if link.url in self._links:
            return False
        self._links[link.url] = link
        return True

    def get(self, url: str) -> ObservedLink | None:
        return self._links.get(url)

    def __contains__(self, url: object) -> bool:
        return url in self._links

    def __iter__(self) -> Iterator[ObservedLink]:
        return iter(self._links.values())

    def __len__(self) -> int:
        return len(self._links)

    def urls(self) -> list[str]:
        return list(self._links)


@dataclass(frozen=True)
class CrawledPage:
    url: str
    content: str
    step: int
    is_target_related: bool
    provenance: ObservedLink
    available: bool = True
    error: str | None = None


def crawl(url: str, observed: ObservedLinks, graph: EvidenceGraph, organic_store: PageStore | None,
          step: int) -> CrawledPage:
    link = observed.get(url)
    if link is None:
        raise ContractViolation(f"crawl of unobserved link {url}")
    page = graph.page_for_url(url)
    if page is not None:
        return CrawledPage(url, page.body, step, True, link)
    if organic_store is None:
        return CrawledPage(url, "", step, False, link, available=False, error="no page store configured")
    try:
        content = organic_store.fetch(url)
    except FetchError as exc:
        logger.info("organic page unavailable: %s", exc)
        return CrawledPage(url, "", step, False, link, available=False, error=str(exc))
    return CrawledPage(url, content, step, False, link)


def register_observations(observed: ObservedLinks, item: Union[SearchRound, CrawledPage], step: int) -> ObservedLinks:
    """Add links from a result list (search provenance) or a crawled body (in-page provenance)."""
    if isinstance(item, SearchRound):
        for r in item.results:
            observed.add(ObservedLink(r.link, Provenance.SEARCH_RESULT, step, item.round_index, r.rank))
    else:
        for _, url in extract_links(item.content):
            observed.add(ObservedLink(url, Provenance.IN_PAGE, step, source_url=item.url))
    return observed
