"""Episode loop: history, budgets, policy consultation and trajectory logging."""

from __future__ import annotations

import hashlib
import logging
import random
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Protocol, Union

from .crawlenv import CrawledPage, ObservedLink, ObservedLinks, Provenance, crawl, register_observations
from .dataset import ExperimentInstance
from .ecosystem.model import EvidenceGraph
from .errors import ContractViolation, HarnessError, PolicyError
from .organic import OrganicProvider, PageStore
from .scorer import LexicalScorer, Scorer
from .searchenv import BrandJudge, EnvConstants, SearchEnvironment, SearchResult, SearchRound, Routing

logger = logging.getLogger(__name__)


# -- actions -----------------------------------------------------------------

@dataclass(frozen=True)
class Search:
    query: str

    def __post_init__(self):
        if not self.query.strip():
            raise ValueError("search query is empty")


@dataclass(frozen=True)
class Crawl:
    url: str


@dataclass(frozen=True)
class Answer:
    text: str

    def __post_init__(self):
        if not self.text.strip():
            raise ValueError("answer is empty")


Action = Union[Search, Crawl, Answer]


@dataclass(frozen=True)
class Budgets:
    max_steps: int = 10
    min_searches: int = 2
    max_searches: int = 5
    min_crawls: int = 2
    max_crawls: int = 5

    def __post_init__(self):
        if not (0 < self.min_searches <= self.max_searches and 0 < self.min_crawls <= self.max_crawls):
            raise ValueError("budgets need 0 < min <= max")
        if self.max_steps <= 0:
            raise ValueError("max_steps must be positive")


# -- history -----------------------------------------------------------------

@dataclass
class History:
    user_query: str
    rounds: list[SearchRound] = field(default_factory=list)
    crawled: list[CrawledPage] = field(default_factory=list)
    observed: ObservedLinks = field(default_factory=ObservedLinks)
    notices: list[str] = field(default_factory=list)
    answered: bool = False

    @property
    def searches(self) -> int:
        return len(self.rounds)

    @property
    def crawls(self) -> int:
        return len(self.crawled)

    @property
    def tool_steps(self) -> int:
        return self.searches + self.crawls

    @property
    def step_count(self) -> int:
        return self.tool_steps + (1 if self.answered else 0)


@dataclass(frozen=True)
class HistoryView:
    """Read-only snapshot handed to the policy."""

    user_query: str
    rounds: tuple[SearchRound, ...]
    crawled: tuple[CrawledPage, ...]
    observed: tuple[ObservedLink, ...]
    notices: tuple[str, ...]
    budgets: Budgets
    must_answer: bool = False

    @property
    def searches_left(self) -> int:
        return self.budgets.max_searches - len(self.rounds)

    @property
    def crawls_left(self) -> int:
        return self.budgets.max_crawls - len(self.crawled)

    @property
    def steps_used(self) -> int:
        return len(self.rounds) + len(self.crawled)

    @property
    def crawled_urls(self) -> set[str]:
        return {c.url for c in self.crawled}


def view_of(history: History, budgets: Budgets, must_answer: bool = False) -> HistoryView:
    return HistoryView(history.user_query, tuple(history.rounds), tuple(history.crawled),
                       tuple(history.observed), tuple(history.notices), budgets, must_answer)


def render_history(view: HistoryView, char_budget: int = 60_000) -> str:
    """Deterministic text rendering of the history for a chat policy.

    When over ``char_budget``, crawled page contents are truncated oldest first;
    result titles, links and snippets are never truncated.
    """
    b = view.budgets
    head = [
        f"User question: {view.user_query}",
        "",
        f"Budget: searches used {len(view.rounds)}/{b.max_searches}, crawls used {len(view.crawled)}/{b.max_crawls}, "
        f"steps used {view.steps_used}/{b.max_steps}.",
    ]
    for rnd in view.rounds:
        head += ["", f"## Search round {rnd.round_index}: {rnd.query}"]
        for r in rnd.results:
            head += [f"{r.rank}. {r.title}", f"   URL: {r.link}", f"   Snippet: {r.snippet}"]
    tail = []
    if view.notices:
        tail += ["", "## Notices"] + [f"- {n}" for n in view.notices]
    if view.must_answer:
        tail += ["", "Tool budget exhausted. Write the final answer now."]

    blocks = []
    for i, page in enumerate(view.crawled, start=1):
        body = page.content if page.available else f"[unavailable: {page.error}]"
        blocks.append((f"## Crawled page {i}: {page.url}", body))
    fixed = sum(len(x) + 1 for x in head + tail) + sum(len(h) + 10 for h, _ in blocks)
    room = max(0, char_budget - fixed)
    bodies: list[str] = [""] * len(blocks)
    for i in range(len(blocks) - 1, -1, -1):
        body = blocks[i][1]
        if len(body) <= room:
            bodies[i] = body
            room -= len(body)
        else:
            bodies[i] = body[:room] + "\n[content truncated]" if room else "[content truncated]"
            room = 0
    crawl_lines = []
    for (h, _), body in zip(blocks, bodies):
        crawl_lines += ["", h, "<<<", body.rstrip("\n"), ">>>"]
    return "\n".join(head + crawl_lines + tail) + "\n"


# -- policy interface --------------------------------------------------------

class AgentPolicy(Protocol):
    def next_action(self, view: HistoryView) -> Action: ...


# -- trajectory --------------------------------------------------------------

TERMINATIONS = ("Answered", "StepLimit", "PolicyError")


@dataclass(frozen=True)
class TrajectoryEvent:
    kind: str  # search | crawl | budget_violation | answer
    step: int
    round: SearchRound | None = None
    page: CrawledPage | None = None
    action: str | None = None
    reason: str | None = None
    message: str | None = None
    text: str | None = None


@dataclass
class Trajectory:
    episode_id: str
    instance_id: str
    condition: str
    seed: int
    events: list[TrajectoryEvent] = field(default_factory=list)
    final_answer: str | None = None
    termination: str = "Answered"
    audit: list[str] = field(default_factory=list)
    forced_first_crawl: str | None = None
    error: str | None = None

    @property
    def rounds(self) -> list[SearchRound]:
        return [e.round for e in self.events if e.kind == "search"]

    @property
    def crawls(self) -> list[CrawledPage]:
        return [e.page for e in self.events if e.kind == "crawl"]

    # serialization ---------------------------------------------------------

    def to_records(self, clock: Callable[[], float] = time.time) -> list[dict[str, Any]]:
        base = {"episode_id": self.episode_id, "instance_id": self.instance_id,
                "condition": self.condition, "seed": self.seed}
        out: list[dict[str, Any]] = []

        def emit(step, event_type, payload):
            out.append({**base, "seq": len(out), "step": step, "event_type": event_type,
                        "payload": payload, "wall_time": clock()})

        for e in self.events:
            if e.kind == "search":
                r = e.round
                emit(e.step, "search_issued", {"query": r.query, "round_index": r.round_index})
                emit(e.step, "results_returned", {
                    "round_index": r.round_index, "routing": r.routing.value,
                    "classification_source": r.classification_source,
                    "results": [x.to_dict() for x in r.results]})
            elif e.kind == "crawl":
                p = e.page
                emit(e.step, "crawl_issued", {"url": p.url})
                emit(e.step, "page_returned", {
                    "url": p.url, "is_target_related": p.is_target_related,
                    "provenance": p.provenance.to_dict(), "available": p.available, "error": p.error,
                    "content_chars": len(p.content),
                    "content_sha1": hashlib.sha1(p.content.encode("utf-8")).hexdigest()})
            elif e.kind == "budget_violation":
                emit(e.step, "budget_violation", {"action": e.action, "reason": e.reason, "message": e.message})
            elif e.kind == "answer":
                emit(e.step, "answer", {"text": e.text})
        last = self.events[-1].step if self.events else 0
        emit(last, "episode_end", {"termination": self.termination, "final_answer": self.final_answer,
                                   "audit": self.audit, "forced_first_crawl": self.forced_first_crawl,
                                   "error": self.error})
        return out

    @classmethod
    def from_records(cls, records: list[dict[str, Any]]) -> "Trajectory":
        if not records:
            raise ValueError("no records")
        first = records[0]
        traj = cls(first["episode_id"], first["instance_id"], first["condition"], int(first["seed"]))
        pending_query: dict[int, str] = {}
        for rec in sorted(records, key=lambda r: r["seq"]):
            p, step, et = rec["payload"], rec["step"], rec["event_type"]
            if et == "search_issued":
                pending_query[p["round_index"]] = p["query"]
            elif et == "results_returned":
                k = p["round_index"]
                rnd = SearchRound(k, pending_query.get(k, ""),
                                  tuple(SearchResult.from_dict(d, k) for d in p["results"]),
                                  Routing(p["routing"]), p.get("classification_source"))
                traj.events.append(TrajectoryEvent("search", step, round=rnd))
            elif et == "page_returned":
                page = CrawledPage(p["url"], "", step, bool(p["is_target_related"]),
                                   ObservedLink.from_dict(p["provenance"]), p.get("available", True), p.get("error"))
                traj.events.append(TrajectoryEvent("crawl", step, page=page))
            elif et == "budget_violation":
                traj.events.append(TrajectoryEvent("budget_violation", step, action=p.get("action"),
                                                   reason=p.get("reason"), message=p.get("message")))
            elif et == "answer":
                traj.events.append(TrajectoryEvent("answer", step, text=p["text"]))
            elif et == "episode_end":
                traj.termination = p["termination"]
                traj.final_answer = p.get("final_answer")
                traj.audit = list(p.get("audit") or [])
                traj.forced_first_crawl = p.get("forced_first_crawl")
                traj.error = p.get("error")
        return traj


def episode_id_for(instance_id: str, condition: str, seed: int) -> str:
    return hashlib.sha256(f"{instance_id}|{condition}|{seed}".encode("utf-8")).hexdigest()[:16]


# -- environment bundle ------------------------------------------------------

@dataclass
class Environment:
    organic: OrganicProvider
    pages: PageStore | None = None
    scorer: Scorer = field(default_factory=LexicalScorer)
    const: EnvConstants = field(default_factory=EnvConstants)
    brand_judge: BrandJudge | None = None
    on_judge_error: str = "lexical"

    def search_env(self, graph: EvidenceGraph, seed: int) -> SearchEnvironment:
        return SearchEnvironment(graph, self.organic, scorer=self.scorer, const=self.const,
                                 brand_judge=self.brand_judge, on_judge_error=self.on_judge_error,
                                 rng=random.Random(seed))


def run_episode(
    instance: ExperimentInstance,
    graph: EvidenceGraph,
    env: Environment,
    policy: AgentPolicy,
    budgets: Budgets = Budgets(),
    seed: int = 0,
    forced_first_crawl: str | None = None,
    *,
    episode_id: str | None = None,
) -> Trajectory:
    if graph.product != instance.product:
        raise ValueError("graph was built for a different product")
    condition = str(graph.condition)
    traj = Trajectory(episode_id or episode_id_for(instance.instance_id, condition, seed),
                      instance.instance_id, condition, seed, forced_first_crawl=forced_first_crawl)
    history = History(instance.query)
    senv = env.search_env(graph, seed)

    def do_search(query: str) -> None:
        rnd = senv.search(query)
        history.rounds.append(rnd)
        step = history.tool_steps
        register_observations(history.observed, rnd, step)
        traj.events.append(TrajectoryEvent("search", step, round=rnd))

    def do_crawl(url: str) -> None:
        step = history.tool_steps + 1
        page = crawl(url, history.observed, graph, env.pages, step)
        history.crawled.append(page)
        register_observations(history.observed, page, step)
        traj.events.append(TrajectoryEvent("crawl", step, page=page))

    def reject(action: str, reason: str, message: str) -> None:
        history.notices.append(message)
        traj.events.append(TrajectoryEvent("budget_violation", history.tool_steps,
                                           action=action, reason=reason, message=message))

    if forced_first_crawl is not None:
        do_search(instance.query)
        if forced_first_crawl not in history.observed:
            raise ContractViolation(f"forced crawl target {forced_first_crawl} was not exposed in round 1")
        do_crawl(forced_first_crawl)

    consultations = 0
    while True:
        must_answer = history.tool_steps >= budgets.max_steps or consultations >= 2 * budgets.max_steps
        try:
            action = policy.next_action(view_of(history, budgets, must_answer))
        except HarnessError as exc:
            traj.termination = "PolicyError"
            traj.error = str(exc)
            logger.warning("episode %s: policy failed: %s", traj.episode_id, exc)
            break
        consultations += 1
        if isinstance(action, Answer):
            history.answered = True
            traj.final_answer = action.text
            traj.events.append(TrajectoryEvent("answer", history.step_count, text=action.text))
            traj.termination = "Answered"
            break
        if must_answer:
            traj.termination = "StepLimit"
            break
        if isinstance(action, Search):
            if history.searches >= budgets.max_searches:
                reject("search", "max_searches",
                       f"Search rejected: the limit of {budgets.max_searches} search rounds is reached.")
                continue
            do_search(action.query)
        elif isinstance(action, Crawl):
            if history.crawls >= budgets.max_crawls:
                reject("crawl", "max_crawls",
                       f"Crawl rejected: the limit of {budgets.max_crawls} crawled links is reached.")
                continue
            if action.url not in history.observed:
                reject("crawl", "unobserved_link",
                       f"Crawl rejected: {action.url} has not appeared in any result list or crawled page.")
                continue
            do_crawl(action.url)
        else:
            raise PolicyError(f"unknown action {action!r}")

    if traj.termination == "Answered":
        if history.searches < budgets.min_searches:
            traj.audit.append(f"min_searches: {history.searches} < {budgets.min_searches}")
        if history.crawls < budgets.min_crawls:
            traj.audit.append(f"min_crawls: {history.crawls} < {budgets.min_crawls}")
    return traj
