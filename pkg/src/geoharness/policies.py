"""Agent policies: a tool-calling chat policy and deterministic scripted/test policies."""

from __future__ import annotations

import json
from typing import Callable, Iterable, Sequence, Union

from . import prompts
from .agent import Action, Answer, Crawl, HistoryView, Search, render_history
from .crawlenv import Provenance
from .dataset import ProductProfile
from .errors import HarnessError, PolicyError, ProtocolError, TransportError
from .llm import ChatBackend

TOOLS = [
    {
        "type": "function",
        "function": {
            "name": "search",
            "description": "Run a web search and return a ranked list of results (title, link, snippet).",
            "parameters": {
                "type": "object",
                "properties": {"query": {"type": "string", "description": "Search keywords."}},
                "required": ["query"],
            },
        },
    },
    {
        "type": "function",
        "function": {
            "name": "crawl",
            "description": "Fetch the content of a link you have already seen in results or in a crawled page.",
            "parameters": {
                "type": "object",
                "properties": {"url": {"type": "string", "description": "The exact link to fetch."}},
                "required": ["url"],
            },
        },
    },
]


def parse_action(message: dict) -> Action:
    """A tool call becomes Search/Crawl; a plain assistant message becomes Answer."""
    calls = message.get("tool_calls") or []
    if calls:
        fn = calls[0].get("function", {})
        name = fn.get("name")
        try:
            args = json.loads(fn.get("arguments") or "{}")
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"tool arguments are not JSON: {fn.get('arguments')!r}") from exc
        try:
            if name == "search":
                return Search(str(args["query"]))
            if name == "crawl":
                return Crawl(str(args["url"]))
        except (KeyError, ValueError) as exc:
            raise ProtocolError(f"bad arguments for {name}: {args!r}") from exc
        raise ProtocolError(f"unknown tool {name!r}")
    content = (message.get("content") or "").strip()
    if not content:
        raise ProtocolError("assistant returned neither a tool call nor text")
    return Answer(content)


class ChatPolicy:
    """Renders the history into the agent prompt and asks the chat backend for one tool call."""

    def __init__(self, backend: ChatBackend, *, year: str, date: str, char_budget: int = 60_000,
                 protocol_retries: int = 1):
        self.backend = backend
        self.year = year
        self.date = date
        self.char_budget = char_budget
        self.protocol_retries = protocol_retries
        self.template = prompts.load("web_search_agent")

    def messages(self, view: HistoryView) -> list[dict]:
        system = self.template.format(topic=view.user_query, year=self.year, date=self.date)
        return [
            {"role": "system", "content": system},
            {"role": "user", "content": render_history(view, self.char_budget)},
        ]

    def next_action(self, view: HistoryView) -> Action:
        messages = self.messages(view)
        tool_choice = "none" if view.must_answer else "auto"
        last: Exception | None = None
        for _ in range(self.protocol_retries + 1):
            try:
                reply = self.backend.complete(messages, tools=TOOLS, tool_choice=tool_choice)
                return parse_action(reply)
            except ProtocolError as exc:
                last = exc
            except TransportError as exc:
                raise PolicyError(f"chat backend failed: {exc}") from exc
        raise PolicyError(f"unusable policy output: {last}")


Step = Union[Action, Callable[[HistoryView], Union[Action, None]]]


class ScriptedPolicy:
    """Pops a predefined list. Callable entries see the view and may return None to be skipped."""

    def __init__(self, steps: Iterable[Step]):
        self.steps = list(steps)

    def next_action(self, view: HistoryView) -> Action:
        while self.steps:
            step = self.steps.pop(0)
            action = step(view) if callable(step) else step
            if action is not None:
                return action
        raise PolicyError("script exhausted")


def _round_link(view: HistoryView, k: int, rank: int) -> str | None:
    for rnd in view.rounds:
        if rnd.round_index == k:
            r = rnd.result_at(rank)
            return r.link if r else None
    return None


def rank5_crawler(product: ProductProfile, answer: str | None = None) -> ScriptedPolicy:
    """Search Q, crawl the rank-5 result, search the product name, crawl the first new round-2 link, answer."""

    def first_new(view: HistoryView):
        crawled = view.crawled_urls
        for r in view.rounds[1].results:
            if r.link not in crawled:
                return Crawl(r.link)
        return None

    text = answer or f"Based on the sources reviewed, I recommend the {product.name} as a suitable option."
    return ScriptedPolicy([
        lambda v: Search(v.user_query),
        lambda v: Crawl(_round_link(v, 1, 5)),
        Search(product.name),
        first_new,
        Answer(text),
    ])


def rank5_skipper(product: ProductProfile, answer: str | None = None) -> ScriptedPolicy:
    """Search Q, crawl rank 1 (organic), run a category-level search, crawl its rank-5 result, answer."""
    category = product.attribute("category") or "products"
    text = answer or "Several options look reasonable; compare prices and warranty terms before buying."
    return ScriptedPolicy([
        lambda v: Search(v.user_query),
        lambda v: Crawl(_round_link(v, 1, 1)),
        Search(f"best {category} buying guide"),
        lambda v: Crawl(_round_link(v, 2, 5)),
        Answer(text),
    ])


def immediate_answerer(answer: str = "I could not find enough information to make a recommendation.") -> ScriptedPolicy:
    return ScriptedPolicy([Answer(answer)])


class GreedyEvidencePolicy:
    """Test policy: crawl the earliest-observed uncrawled target link, else search the product name, else answer."""

    def __init__(self, target_urls: Iterable[str], product: ProductProfile):
        self.targets = set(target_urls)
        self.product = product

    def next_action(self, view: HistoryView) -> Action:
        if not view.must_answer:
            if not view.rounds:
                return Search(view.user_query)
            if view.crawls_left > 0:
                crawled = view.crawled_urls
                for link in view.observed:
                    if link.url in self.targets and link.url not in crawled:
                        return Crawl(link.url)
            searched = {r.query for r in view.rounds}
            if view.searches_left > 0 and self.product.name not in searched:
                return Search(self.product.name)
        n = sum(1 for c in view.crawled if c.is_target_related)
        if n:
            return Answer(f"After checking {n} sources, I recommend the {self.product.name} as a suitable option.")
        return Answer("No single product stood out in the sources reviewed.")
