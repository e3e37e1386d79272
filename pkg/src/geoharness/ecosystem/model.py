from __future__ import annotations

import enum
from collections import deque
from dataclasses import dataclass, field
from typing import Mapping
from urllib.parse import urlparse

from ..dataset import ProductProfile


class PageRole(str, enum.Enum):
    NAVIGATION = "Navigation"
    OFFICIAL = "Official"
    REVIEW = "Review"
    EXPERT = "Expert"
    NEWS = "News"
    FORUM = "Forum"
    SOCIAL = "Social"

    @property
    def slug(self) -> str:
        return self.value.lower()


SUPPORT_ROLES = (
    PageRole.OFFICIAL,
    PageRole.REVIEW,
    PageRole.EXPERT,
    PageRole.NEWS,
    PageRole.FORUM,
    PageRole.SOCIAL,
)

# Fictional hosts under the reserved ``.example`` TLD; organic results never use them.
ROLE_HOSTS = {
    PageRole.NAVIGATION: "guides.consumer-picks.example",
    PageRole.OFFICIAL: "www.brand-official.example",
    PageRole.REVIEW: "www.gear-review-lab.example",
    PageRole.EXPERT: "insights.expert-bench.example",
    PageRole.NEWS: "news.techwire-daily.example",
    PageRole.FORUM: "forum.buyers-circle.example",
    PageRole.SOCIAL: "feed.social-buzz.example",
}
RESERVED_HOSTS = frozenset(ROLE_HOSTS.values())


def is_reserved_url(url: str) -> bool:
    return urlparse(url).hostname in RESERVED_HOSTS


class Condition(str, enum.Enum):
    SINGLE_PAGE = "SinglePage"
    PAGE_GEO = "PageGEO"
    UNCOORDINATED = "Uncoordinated"
    COORDINATED = "Coordinated"
    TRACE = "Trace"


@dataclass(frozen=True)
class ConditionTag:
    value: Condition
    rewriter_label: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "value", Condition(self.value))
        if (self.value is Condition.PAGE_GEO) != bool(self.rewriter_label):
            raise ValueError("rewriter_label is required for PageGEO and forbidden otherwise")

    @classmethod
    def parse(cls, text: str) -> "ConditionTag":
        """Accepts ``Trace`` or ``PageGEO:<label>``."""
        name, _, label = text.partition(":")
        return cls(Condition(name.strip()), label.strip() or None)

    @property
    def single_page(self) -> bool:
        return self.value in (Condition.SINGLE_PAGE, Condition.PAGE_GEO)

    def __str__(self) -> str:
        if self.rewriter_label:
            return f"{self.value.value}:{self.rewriter_label}"
        return self.value.value


@dataclass(frozen=True)
class Outlink:
    anchor: str
    url: str
    external: bool = False


@dataclass(frozen=True)
class EvidencePage:
    page_id: str
    role: PageRole
    title: str
    url: str
    body: str
    outlinks: tuple[Outlink, ...] = ()
    attributes_echo: tuple[tuple[str, str], ...] = ()

    def manifest_entry(self) -> dict:
        return {
            "page_id": self.page_id,
            "role": self.role.value,
            "title": self.title,
            "url": self.url,
            "outlinks": [
                {"anchor": o.anchor, "url": o.url, "external": o.external} for o in self.outlinks
            ],
            "attributes_echo": [list(a) for a in self.attributes_echo],
        }


@dataclass(frozen=True)
class Violation:
    page_id: str | None
    rule: str
    message: str

    def __str__(self) -> str:
        return f"[{self.rule}] {self.page_id or '<graph>'}: {self.message}"


@dataclass(frozen=True)
class EvidenceGraph:
    """Synthetic pages for one product under one condition. Treat as immutable."""

    product: ProductProfile
    condition: ConditionTag
    entry_page_id: str
    pages: Mapping[str, EvidencePage] = field(default_factory=dict)

    @property
    def entry(self) -> EvidencePage:
        return self.pages[self.entry_page_id]

    @property
    def url_index(self) -> dict[str, str]:
        return {p.url: pid for pid, p in self.pages.items()}

    @property
    def urls(self) -> frozenset[str]:
        return frozenset(p.url for p in self.pages.values())

    def page_for_url(self, url: str) -> EvidencePage | None:
        pid = self.url_index.get(url)
        return self.pages[pid] if pid is not None else None

    @property
    def edges(self) -> frozenset[tuple[str, str]]:
        index = self.url_index
        out = set()
        for pid, page in self.pages.items():
            for o in page.outlinks:
                if not o.external and o.url in index:
                    out.add((pid, index[o.url]))
        return frozenset(out)

    @property
    def support_ids(self) -> list[str]:
        return [pid for pid in self.pages if pid != self.entry_page_id]

    def reachable_from_entry(self) -> set[str]:
        adj: dict[str, list[str]] = {}
        for src, dst in self.edges:
            adj.setdefault(src, []).append(dst)
        seen = {self.entry_page_id}
        queue = deque([self.entry_page_id])
        while queue:
            cur = queue.popleft()
            for nxt in adj.get(cur, ()):
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        return seen
