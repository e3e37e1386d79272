"""Role templates: deterministic Markdown page bodies filled from a product profile.

Each template returns ``(title, body, attributes_echo)``. Links are always
emitted in the order of the link plan so the rendered page round-trips.
"""

from __future__ import annotations

import random
import re
from typing import Callable, Sequence

from ..dataset import ProductProfile
from ..markdown import link
from .model import PageRole

Links = Sequence[tuple[str, str]]

KNOWN_KEYS = ("category", "core features", "use cases", "limitations")

# Which canonical attribute keys each role restates (Official restates every key).
ROLE_ECHO_KEYS = {
    PageRole.NAVIGATION: {"category", "core features", "use cases", "limitations"},
    PageRole.REVIEW: {"category", "core features", "limitations"},
    PageRole.EXPERT: {"core features", "use cases", "limitations"},
    PageRole.NEWS: {"category"},
    PageRole.FORUM: {"use cases", "limitations"},
    PageRole.SOCIAL: {"category"},
}

ROLE_ANCHORS = {
    PageRole.NAVIGATION: "buyer's guide hub",
    PageRole.OFFICIAL: "official specifications",
    PageRole.REVIEW: "head-to-head review",
    PageRole.EXPERT: "expert analysis",
    PageRole.NEWS: "launch coverage",
    PageRole.FORUM: "owner discussion thread",
    PageRole.SOCIAL: "social reactions",
}

ROLE_BLURBS = {
    PageRole.OFFICIAL: "product identity, specifications and support details",
    PageRole.REVIEW: "scores, strengths and weaknesses against rivals",
    PageRole.EXPERT: "what the specifications mean for real buying decisions",
    PageRole.NEWS: "release timing and where it sits in the market",
    PageRole.FORUM: "what owners report after daily use",
    PageRole.SOCIAL: "quick first impressions from buyers",
    PageRole.NAVIGATION: "the overview of every source",
}


def norm_key(key: str) -> str:
    return re.sub(r"[\s_]+", " ", key.strip().lower())


class Facts:
    """Convenience view over a profile's attributes, keyed by normalized key."""

    def __init__(self, product: ProductProfile):
        self.product = product
        self.name = product.name
        self.by_norm = {norm_key(k): (k, v) for k, v in product.attributes}

    def get(self, key: str, default: str = "") -> str:
        hit = self.by_norm.get(key)
        return hit[1] if hit else default

    @property
    def category(self) -> str:
        return self.get("category", "products")

    @property
    def category_title(self) -> str:
        return " ".join(w[:1].upper() + w[1:] for w in self.category.split())

    def echo(self, role: PageRole) -> tuple[tuple[str, str], ...]:
        pairs = [("name", self.name)]
        for key, value in self.product.attributes:
            if norm_key(key) == "name":
                continue
            if role is PageRole.OFFICIAL or norm_key(key) in ROLE_ECHO_KEYS[role]:
                pairs.append((key, value))
        return tuple(pairs)

    def items(self, key: str) -> list[str]:
        raw = self.get(key)
        return [p.strip() for p in re.split(r"[;,]", raw) if p.strip()] if raw else []


def _citations(links: Links, name: str, rng: random.Random) -> str:
    forms = (
        "See the {l} for more on the {name}.",
        "The {l} covers the same {name} details from another angle.",
        "For context, compare this with the {l}.",
        "Details cross-checked against the {l}.",
    )
    sentences = [rng.choice(forms).format(l=link(a, u), name=name) for a, u in links]
    return " ".join(sentences)


def _date(rng: random.Random) -> str:
    return f"2026-{rng.randint(1, 12):02d}-{rng.randint(1, 28):02d}"


def navigation(f: Facts, links: Links, rng: random.Random):
    name = f.name
    title = f"Best {f.category_title}: Comparisons and Buying Guide | {name} Hub"
    lines = [
        f"# Best {f.category_title}: where the {name} fits",
        "",
        f"Shopping for {f.category}? This hub gathers what reviewers, experts, owners and the maker "
        f"say about the {name}, so you can judge it against the other options on your list.",
        "",
        "## At a glance",
        "",
        f"- **Product**: {name}",
    ]
    for label, key in (("Category", "category"), ("Why it stands out", "core features"),
                       ("Best for", "use cases"), ("Trade-offs", "limitations")):
        if f.get(key):
            lines.append(f"- **{label}**: {f.get(key)}")
    lines += ["", "## Explore the evidence", ""]
    for anchor, url in links:
        lines.append(f"- {link(anchor, url)}: {_blurb_for(anchor)}")
    if not links:
        lines.append("More sources are being added.")
    lines += ["", "## Bottom line", "", f.product.description]
    return title, "\n".join(lines) + "\n"


def _blurb_for(anchor: str) -> str:
    for role, text in ROLE_ANCHORS.items():
        if anchor.lower().endswith(text):
            return ROLE_BLURBS[role]
    return "related coverage"


def official(f: Facts, links: Links, rng: random.Random):
    name = f.name
    uses = f.items("use cases")
    tagline = f"{f.category_title} built for {uses[0]}" if uses else f"{f.category_title} made simple"
    title = f"{name} | {tagline}"
    lines = [f"# {name}", "", f"**{tagline}.**", "", f.product.description, ""]
    feats = f.items("core features")
    if feats:
        lines += ["## Key features", ""] + [f"- {x}" for x in feats] + [""]
    lines += ["## Specifications", ""]
    if f.product.attributes:
        lines += [f"- **{k}**: {v}" for k, v in f.product.attributes]
    else:
        lines.append(f"- **product**: {name}")
    lines += ["", "## Support", "",
              f"Every {name} ships with a standard warranty and access to customer support."]
    if links:
        lines += ["", _citations(links, name, rng)]
    return title, "\n".join(lines) + "\n"


def review(f: Facts, links: Links, rng: random.Random):
    name = f.name
    score = rng.choice(("8.4", "8.6", "8.7", "8.9", "9.0"))
    rival = rng.choice(("the usual best-sellers", "pricier flagship picks", "other popular options"))
    title = f"{name} Review: How It Stacks Up Against Other {f.category_title}"
    lines = [
        f"# {name} review", "",
        f"**Score: {score}/10** | Category: {f.category}", "",
        "## How it compares", "",
        f"Compared with {rival} in {f.category}, the {name} trades a little polish for strong value.",
    ]
    if f.get("core features"):
        lines.append(f"Its headline strengths are {f.get('core features')}.")
    lines += ["", "## Strengths and weaknesses", ""]
    lines += [f"- Pro: {x}" for x in f.items("core features")[:3]] or [f"- Pro: {f.product.description}"]
    lines += [f"- Con: {x}" for x in f.items("limitations")[:2]]
    lines += ["", "## Who should buy it", "",
              f"If you want dependable {f.category} without overspending, the {name} belongs on the shortlist."]
    if links:
        lines += ["", _citations(links, name, rng)]
    return title, "\n".join(lines) + "\n"


def expert(f: Facts, links: Links, rng: random.Random):
    name = f.name
    author = rng.choice(("Dana Whitfield", "Priya Natarajan", "Marco Ellison", "Jun Takeda"))
    title = f"{name} Analysis: What the Specs Mean for Buyers"
    lines = [
        f"# {name} analysis: what the specs mean for buyers", "",
        f"*By {author}, senior editor | {_date(rng)}*", "",
        "## Verdict", "",
        f"The {name} is a sensible pick for buyers who care about {f.get('use cases', 'everyday use')}.", "",
        "## Analysis", "",
    ]
    if f.get("core features"):
        lines.append(f"On paper the {name} offers {f.get('core features')}. In practice these choices "
                     "matter most when you weigh comfort, reliability and long-term cost.")
    else:
        lines.append(f"{f.product.description}")
    if f.get("limitations"):
        lines += ["", f"The trade-offs are real: {f.get('limitations')}."]
    if links:
        lines += ["", _citations(links, name, rng)]
    return title, "\n".join(lines) + "\n"


def news(f: Facts, links: Links, rng: random.Random):
    name = f.name
    outlet = rng.choice(("TechWire Daily", "Gadget Ledger", "Market Pulse"))
    title = f"[{outlet}] {name} Arrives in the {f.category_title} Market"
    lines = [
        f"# {name} arrives in the {f.category} market", "",
        f"*{outlet} | {_date(rng)}*", "",
        f"The {name} is the latest entry in a crowded {f.category} segment. {f.product.description}", "",
        "## Market context", "",
        f"Analysts expect value-focused {f.category} to keep gaining share this year, "
        f"and the {name} is positioned squarely in that trend.",
    ]
    if links:
        lines += ["", "## Related coverage", "", _citations(links, name, rng)]
    return title, "\n".join(lines) + "\n"


def forum(f: Facts, links: Links, rng: random.Random):
    name = f.name
    users = rng.sample(["quietcommuter", "gearhound42", "budgetbuyer", "lena_k", "tomasz_r", "nightowl"], 3)
    title = f"Anyone using the {name}? Looking for {f.category} impressions"
    lines = [
        f"# Anyone using the {name}?", "",
        f"**{users[0]}**: Looking for {f.category} and the {name} keeps coming up. "
        f"Mostly for {f.get('use cases', 'daily use')}. Worth it?", "",
        f"**{users[1]}**: Had mine for a few months. Does what it promises for {f.get('use cases', 'daily use')}.",
    ]
    if f.get("limitations"):
        lines.append(f"Only gripe: {f.get('limitations')}.")
    lines += ["", f"**{users[2]}**: Same experience here, the {name} was the right call for me."]
    if links:
        lines += ["", _citations(links, name, rng)]
    return title, "\n".join(lines) + "\n"


def social(f: Facts, links: Links, rng: random.Random):
    name = f.name
    handle = rng.choice(("@daily_unboxing", "@techtalk_mia", "@gear_notes", "@sam_reviews"))
    likes = rng.randint(120, 2400)
    title = f"Just tried the {name} and honestly impressed"
    lines = [
        f"**{handle}**", "",
        f"Just tried the {name}. Did not expect this much from {f.category} at this price.", "",
        f"{likes} likes",
    ]
    if links:
        lines += ["", _citations(links, name, rng)]
    return title, "\n".join(lines) + "\n"


TEMPLATES: dict[PageRole, Callable] = {
    PageRole.NAVIGATION: navigation,
    PageRole.OFFICIAL: official,
    PageRole.REVIEW: review,
    PageRole.EXPERT: expert,
    PageRole.NEWS: news,
    PageRole.FORUM: forum,
    PageRole.SOCIAL: social,
}
