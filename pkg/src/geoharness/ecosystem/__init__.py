"""Coordinated evidence graphs: page roles, generation, linting and export."""

from .build import build_ecosystem, generate_page, link_plans, page_layout, render_page
from .export import export_graph, load_graph
from .generator import LLMPageGenerator, PageGenerator, RewrittenPageGenerator, TemplateGenerator, page_url
from .model import (
    RESERVED_HOSTS,
    SUPPORT_ROLES,
    Condition,
    ConditionTag,
    EvidenceGraph,
    EvidencePage,
    Outlink,
    PageRole,
    Violation,
)
from .validate import validate_graph

__all__ = [
    "RESERVED_HOSTS", "SUPPORT_ROLES", "Condition", "ConditionTag", "EvidenceGraph", "EvidencePage",
    "LLMPageGenerator", "Outlink", "PageGenerator", "PageRole", "RewrittenPageGenerator",
    "TemplateGenerator", "Violation", "build_ecosystem", "export_graph", "generate_page",
    "link_plans", "load_graph", "page_layout", "page_url", "render_page", "validate_graph",
]
