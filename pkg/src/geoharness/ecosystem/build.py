from __future__ import annotations

import dataclasses
import logging

from ..dataset import ProductProfile
from ..errors import GenerationError, HarnessError, NotFoundError, TransportError, ValidationError
from .generator import LinkPlan, PageGenerator, page_url
from .model import SUPPORT_ROLES, Condition, ConditionTag, EvidenceGraph, EvidencePage, Outlink, PageRole
from .templates import ROLE_ANCHORS
from .validate import validate_graph

logger = logging.getLogger(__name__)

# Support-level citations: each role cites these roles when they exist in the graph.
CROSS_REFS = {
    PageRole.OFFICIAL: (PageRole.REVIEW, PageRole.EXPERT),
    PageRole.REVIEW: (PageRole.OFFICIAL, PageRole.EXPERT),
    PageRole.EXPERT: (PageRole.OFFICIAL, PageRole.REVIEW),
    PageRole.NEWS: (PageRole.OFFICIAL, PageRole.EXPERT),
    PageRole.FORUM: (PageRole.REVIEW, PageRole.OFFICIAL),
    PageRole.SOCIAL: (PageRole.FORUM, PageRole.OFFICIAL),
}


def _page_ids(role: PageRole, count: int) -> list[str]:
    return [role.slug if i == 0 else f"{role.slug}-{i + 1}" for i in range(count)]


def page_layout(condition: ConditionTag, pages_per_role: int = 1) -> tuple[str, list[tuple[str, PageRole]]]:
    """Return ``(entry_page_id, [(page_id, role), ...])`` for a condition, entry first."""
    if pages_per_role < 1:
        raise ValueError("pages_per_role must be >= 1")
    if condition.single_page:
        return "official", [("official", PageRole.OFFICIAL)]
    if condition.value is Condition.TRACE:
        layout = [("navigation", PageRole.NAVIGATION)]
        for role in SUPPORT_ROLES:
            layout += [(pid, role) for pid in _page_ids(role, pages_per_role)]
        return "navigation", layout
    # ablation variants: review-style entry plus the remaining support pages
    layout = []
    for role in SUPPORT_ROLES:
        layout += [(pid, role) for pid in _page_ids(role, pages_per_role)]
    layout.sort(key=lambda item: item[0] != "review")
    return "review", layout


def link_plans(
    product: ProductProfile, condition: ConditionTag, layout: list[tuple[str, PageRole]], entry_id: str
) -> dict[str, list[tuple[str, str]]]:
    urls = {pid: page_url(product, role, pid) for pid, role in layout}
    roles = dict(layout)
    plans: dict[str, list[tuple[str, str]]] = {pid: [] for pid, _ in layout}
    if condition.single_page or condition.value is Condition.UNCOORDINATED:
        return plans
    name = product.name
    first_of_role = {}
    for pid, role in layout:
        first_of_role.setdefault(role, pid)
    for pid, role in layout:
        if pid == entry_id:
            plans[pid] = [
                (f"{name} {ROLE_ANCHORS[roles[t]]}", urls[t]) for t, _ in layout if t != entry_id
            ]
            continue
        for cited_role in CROSS_REFS[role]:
            target = first_of_role.get(cited_role)
            if target is not None and target != pid:
                plans[pid].append((f"{name} {ROLE_ANCHORS[cited_role]}", urls[target]))
    return plans


def build_ecosystem(
    product: ProductProfile,
    condition: ConditionTag,
    generator: PageGenerator,
    seed: int,
    *,
    pages_per_role: int = 1,
) -> EvidenceGraph:
    """Generate every page of the condition's layout, wire links, and validate.

    Raises ValidationError listing all violations; nothing is repaired silently.
    """
    entry_id, layout = page_layout(condition, pages_per_role)
    plans = link_plans(product, condition, layout, entry_id)
    pages: dict[str, EvidencePage] = {}
    for pid, role in layout:
        try:
            page = generator.generate(product, role, plans[pid], page_id=pid, seed=seed)
        except (GenerationError, ValidationError, TransportError):
            raise
        except HarnessError as exc:
            raise GenerationError(role.value, str(exc)) from exc
        pages[pid] = page
    graph_urls = {p.url for p in pages.values()}
    for pid, page in pages.items():
        tagged = tuple(dataclasses.replace(o, external=o.url not in graph_urls) for o in page.outlinks)
        pages[pid] = dataclasses.replace(page, outlinks=tagged)
    graph = EvidenceGraph(product=product, condition=condition, entry_page_id=entry_id, pages=pages)
    violations = validate_graph(graph)
    if violations:
        raise ValidationError(f"ecosystem for {product.name!r} ({condition}) is invalid", violations)
    logger.debug("built %s graph for %s: %d pages", condition, product.name, len(pages))
    return graph


def render_page(graph: EvidenceGraph, page_id: str) -> str:
    """Markdown served for a page; its links are exactly the page's outlinks, in order."""
    try:
        return graph.pages[page_id].body
    except KeyError:
        raise NotFoundError(f"no page {page_id!r} in graph") from None


def generate_page(product, role, link_plan: LinkPlan, generator: PageGenerator, *, page_id=None, seed=0):
    return generator.generate(product, role, link_plan, page_id=page_id or role.slug, seed=seed)


def strip_outlink(page: EvidencePage, url: str) -> EvidencePage:
    """Test helper: drop one link (syntax and outlink) from a page."""
    from ..markdown import INLINE_LINK_RE

    body = INLINE_LINK_RE.sub(lambda m: m.group(1) if m.group(2) == url else m.group(0), page.body)
    return dataclasses.replace(page, body=body, outlinks=tuple(o for o in page.outlinks if o.url != url))
