"""Graph linter: structural, attribute-consistency and condition-specific link rules."""

from __future__ import annotations

from collections import Counter

from ..errors import HarnessError
from ..markdown import extract_links, strip_links
from ..textutil import mentions_name
from .model import Condition, EvidenceGraph, PageRole, Violation, is_reserved_url


def validate_graph(graph: EvidenceGraph) -> list[Violation]:
    """Return every violated rule; an empty list means the graph is valid for its condition."""
    if graph.entry_page_id not in graph.pages:
        raise HarnessError(f"entry page {graph.entry_page_id!r} missing from graph")
    for pid, page in graph.pages.items():
        if page.page_id != pid:
            raise HarnessError(f"page map key {pid!r} does not match page_id {page.page_id!r}")

    out: list[Violation] = []
    out += _page_rules(graph)
    out += _attribute_rules(graph)
    out += _condition_rules(graph)
    return out


def _page_rules(graph: EvidenceGraph) -> list[Violation]:
    out = []
    url_counts = Counter(p.url for p in graph.pages.values())
    urls = set(url_counts)
    name = graph.product.name
    for pid, page in graph.pages.items():
        if url_counts[page.url] > 1:
            out.append(Violation(pid, "url-unique", f"url {page.url} used by more than one page"))
        if not is_reserved_url(page.url):
            out.append(Violation(pid, "url-host", f"host of {page.url} is not a reserved fictional host"))
        if not page.title.strip():
            out.append(Violation(pid, "title", "empty title"))
        if not page.body.strip():
            out.append(Violation(pid, "body", "empty body"))
        elif not mentions_name(strip_links(page.body), name):
            out.append(Violation(pid, "name-in-body", f"body never mentions {name!r}"))
        body_links = [u for _, u in extract_links(page.body)]
        if body_links != [o.url for o in page.outlinks]:
            out.append(Violation(pid, "outlinks-match-body", "outlinks differ from the links in the body"))
        for o in page.outlinks:
            if not o.external and o.url not in urls:
                out.append(Violation(pid, "outlink-resolves", f"{o.url} is neither in the graph nor external"))
    return out


def _attribute_rules(graph: EvidenceGraph) -> list[Violation]:
    out = []
    canonical = dict(graph.product.attributes)
    seen: dict[str, tuple[str, str]] = {}
    for pid, page in graph.pages.items():
        for key, value in page.attributes_echo:
            if key == "name":
                if value != graph.product.name:
                    out.append(Violation(pid, "attribute-consistency",
                                         f"product named {value!r}, expected {graph.product.name!r}"))
                continue
            if key in canonical:
                if value != canonical[key]:
                    out.append(Violation(pid, "attribute-consistency",
                                         f"{key!r} is {value!r}, profile says {canonical[key]!r}"))
            elif key in seen and seen[key][1] != value:
                out.append(Violation(pid, "attribute-consistency",
                                     f"{key!r} is {value!r} but page {seen[key][0]} says {seen[key][1]!r}"))
            else:
                seen.setdefault(key, (pid, value))
    return out


def _condition_rules(graph: EvidenceGraph) -> list[Violation]:
    cond = graph.condition.value
    entry = graph.entry
    edges = graph.edges
    out = []
    roles = Counter(p.role for p in graph.pages.values())

    if graph.condition.single_page:
        if len(graph.pages) != 1:
            out.append(Violation(None, "single-page", f"expected 1 page, found {len(graph.pages)}"))
        if entry.role is not PageRole.OFFICIAL:
            out.append(Violation(entry.page_id, "entry-role", "single-page entry must be Official"))
        if edges:
            out.append(Violation(None, "no-edges", f"{len(edges)} internal edges in a single-page graph"))
        return out

    if cond is Condition.TRACE:
        if entry.role is not PageRole.NAVIGATION:
            out.append(Violation(entry.page_id, "entry-role", "Trace entry must be a Navigation page"))
        if roles[PageRole.NAVIGATION] != 1:
            out.append(Violation(None, "navigation-count",
                                 f"expected exactly one Navigation page, found {roles[PageRole.NAVIGATION]}"))
        linked_roles = {graph.pages[dst].role for src, dst in edges if src == entry.page_id}
        for role in roles:
            if role is not entry.role and role not in linked_roles:
                out.append(Violation(entry.page_id, "entry-links-roles", f"entry does not link to any {role.value} page"))
        out += _reachability(graph)
        return out

    if roles[PageRole.NAVIGATION]:
        out.append(Violation(None, "navigation-count", f"{cond.value} graphs carry no Navigation page"))
    if entry.role is not PageRole.REVIEW:
        out.append(Violation(entry.page_id, "entry-role", f"{cond.value} entry must be a Review page"))
    supports = set(graph.support_ids)
    if cond is Condition.UNCOORDINATED:
        if edges:
            out.append(Violation(None, "no-edges", f"{len(edges)} internal edges in an uncoordinated graph"))
        return out

    # Coordinated
    from_entry = {dst for src, dst in edges if src == entry.page_id}
    for pid in sorted(supports - from_entry):
        out.append(Violation(entry.page_id, "entry-links-supports", f"entry does not link to {pid}"))
    for pid in graph.support_ids:
        if not any(src == pid and dst in supports and dst != pid for src, dst in edges):
            out.append(Violation(pid, "support-connectivity", "support page cites no other support page"))
    out += _reachability(graph)
    return out


def _reachability(graph: EvidenceGraph) -> list[Violation]:
    reach = graph.reachable_from_entry()
    return [
        Violation(pid, "reachability", "not reachable from the entry page")
        for pid in graph.pages
        if pid not in reach
    ]
