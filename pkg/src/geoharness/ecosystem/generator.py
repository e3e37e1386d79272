"""Page generators: deterministic template fill, LLM realization, and pre-rewritten bodies."""

from __future__ import annotations

import random
from typing import Protocol, Sequence

from .. import prompts
from ..dataset import ProductProfile
from ..errors import GenerationError, HarnessError, TransportError, ValidationError
from ..llm import ChatBackend
from ..markdown import extract_links, link, strip_links
from ..textutil import mentions_name, slugify
from .model import ROLE_HOSTS, EvidencePage, Outlink, PageRole
from .templates import TEMPLATES, Facts

LinkPlan = Sequence[tuple[str, str]]


def page_url(product: ProductProfile, role: PageRole, page_id: str) -> str:
    return f"https://{ROLE_HOSTS[role]}/{slugify(product.name)}/{page_id}"


def _page_rng(product: ProductProfile, role: PageRole, page_id: str, seed: int) -> random.Random:
    # str seeds hash through sha512, so this is stable across processes
    return random.Random(f"{seed}|{product.name}|{role.value}|{page_id}")


def _outlinks(body: str) -> tuple[Outlink, ...]:
    return tuple(Outlink(a, u) for a, u in extract_links(body))


class PageGenerator(Protocol):
    label: str

    def generate(
        self, product: ProductProfile, role: PageRole, link_plan: LinkPlan, *, page_id: str, seed: int
    ) -> EvidencePage: ...


class TemplateGenerator:
    """Slot substitution into the role templates; byte-stable for fixed inputs."""

    label = "template"

    def render(self, product, role, link_plan, *, page_id, seed):
        rng = _page_rng(product, role, page_id, seed)
        return TEMPLATES[role](Facts(product), list(link_plan), rng)

    def generate(self, product, role, link_plan, *, page_id, seed):
        title, body = self.render(product, role, link_plan, page_id=page_id, seed=seed)
        return EvidencePage(
            page_id=page_id,
            role=role,
            title=title,
            url=page_url(product, role, page_id),
            body=body,
            outlinks=_outlinks(body),
            attributes_echo=Facts(product).echo(role),
        )


class LLMPageGenerator:
    """Asks a chat model to realize the role template; title and url stay template-owned."""

    label = "llm"

    def __init__(self, backend: ChatBackend, *, max_chars: dict[PageRole, int] | None = None):
        self.backend = backend
        self.max_chars = {PageRole.SOCIAL: 800, **(max_chars or {})}
        self.skeleton = TemplateGenerator()

    def generate(self, product, role, link_plan, *, page_id, seed):
        title, skeleton = self.skeleton.render(product, role, link_plan, page_id=page_id, seed=seed)
        limit = self.max_chars.get(role)
        prompt = prompts.load("page_generation").format(
            role=role.value.lower(),
            name=product.name,
            description=product.description,
            attributes="\n".join(f"- {k}: {v}" for k, v in product.attributes) or "- (none)",
            template=skeleton,
            links="\n".join(f"- {link(a, u)}" for a, u in link_plan) or "- (none)",
            length_note=f" Keep it under {limit} characters." if limit else "",
        )
        try:
            reply = self.backend.complete([{"role": "user", "content": prompt}])
        except TransportError:
            raise
        except HarnessError as exc:
            raise GenerationError(role.value, str(exc)) from exc
        body = (reply.get("content") or "").strip()
        if not body:
            raise GenerationError(role.value, "empty generation")
        if not mentions_name(strip_links(body), product.name):
            raise ValidationError(f"generated {role.value} page does not mention {product.name!r}")
        present = {u for _, u in extract_links(body)}
        missing = [(a, u) for a, u in link_plan if u not in present]
        if missing:
            body += "\n\n## Related\n\n" + "\n".join(f"- {link(a, u)}" for a, u in missing)
        body += "\n"
        if limit is not None and len(body) > limit:
            raise ValidationError(f"generated {role.value} page exceeds {limit} characters")
        return EvidencePage(
            page_id=page_id,
            role=role,
            title=title,
            url=page_url(product, role, page_id),
            body=body,
            outlinks=_outlinks(body),
            attributes_echo=Facts(product).echo(role),
        )


class RewrittenPageGenerator:
    """Serves an externally rewritten official-page body (page-level optimization output).

    Title and url are those of the unoptimized single page, so only the content differs.
    """

    def __init__(self, body: str, label: str):
        if not body.strip():
            raise ValueError("rewritten body is empty")
        self.body = body if body.endswith("\n") else body + "\n"
        self.label = label
        self.skeleton = TemplateGenerator()

    def generate(self, product, role, link_plan, *, page_id, seed):
        if role is not PageRole.OFFICIAL:
            raise GenerationError(role.value, "rewritten bodies exist only for the official page")
        title, _ = self.skeleton.render(product, role, link_plan, page_id=page_id, seed=seed)
        return EvidencePage(
            page_id=page_id,
            role=role,
            title=title,
            url=page_url(product, role, page_id),
            body=self.body,
            outlinks=_outlinks(self.body),
            attributes_echo=(("name", product.name),),
        )
