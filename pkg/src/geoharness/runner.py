"""Experiment orchestration: backends from config, resumable per-cell runs, metrics over logs."""

from __future__ import annotations

import json
import logging
import os
import tempfile
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable

from . import __version__
from .agent import AgentPolicy, Environment, Trajectory, episode_id_for, run_episode
from .config import ChatConfig, RunConfig
from .dataset import (
    ExperimentInstance,
    FixtureIntentJudge,
    IntentJudge,
    LexicalIntentJudge,
    LLMIntentJudge,
    load_instances,
)
from .ecosystem import (
    ConditionTag,
    EvidenceGraph,
    LLMPageGenerator,
    PageGenerator,
    RewrittenPageGenerator,
    TemplateGenerator,
    build_ecosystem,
    export_graph,
    load_graph,
)
from .errors import ConfigError, HarnessError
from .judge import Judge, LexicalJudge, LLMJudge
from .llm import ChatBackend, ChatClient, ReplayChatClient
from .metrics import (
    MetricsReport,
    aggregate,
    emit_report,
    extract_signals,
    read_trajectories,
    read_verdicts,
)
from .organic import (
    CachedProvider,
    DirectoryPageStore,
    FixtureProvider,
    LiveProvider,
    LivePageStore,
    SyntheticProvider,
)
from .judge import Verdict
from .policies import ChatPolicy, GreedyEvidencePolicy, immediate_answerer, rank5_crawler, rank5_skipper
from .scorer import FallbackScorer, LexicalScorer, RemoteScorer

logger = logging.getLogger(__name__)


# -- factories ---------------------------------------------------------------

def chat_backend(cfg: ChatConfig) -> ChatBackend:
    inner = None
    if cfg.endpoint:
        inner = ChatClient(cfg.endpoint, cfg.model, api_key_env=cfg.api_key_env, temperature=cfg.temperature)
    if cfg.cassette:
        return ReplayChatClient(cfg.cassette, model=cfg.model or "replay", inner=inner)
    if inner is None:
        raise ConfigError("chat backend needs an endpoint or a cassette")
    return inner


def make_judge(cfg: RunConfig) -> Judge:
    if cfg.judge.kind == "llm":
        return LLMJudge(chat_backend(cfg.judge))
    return LexicalJudge()


def make_intent_judge(cfg: RunConfig) -> IntentJudge:
    if cfg.intent.kind == "llm":
        return LLMIntentJudge(chat_backend(cfg.intent))
    if cfg.intent.kind == "fixture":
        if not cfg.intent.verdicts:
            raise ConfigError("intent.verdicts is required for the fixture intent judge")
        return FixtureIntentJudge.from_file(cfg.intent.verdicts)
    return LexicalIntentJudge()


def make_environment(cfg: RunConfig) -> Environment:
    prov = cfg.provider
    if prov.mode == "fixture":
        root = Path(prov.root)
        organic = FixtureProvider(root)
        pages = DirectoryPageStore(root / "pages")
    elif prov.mode == "live":
        organic = LiveProvider(prov.endpoint)
        pages = LivePageStore()
    else:
        organic = SyntheticProvider(cfg.seed)
        pages = organic
    if cfg.scorer.kind == "remote":
        scorer = FallbackScorer(RemoteScorer(cfg.scorer.endpoint, token_env=cfg.scorer.token_env),
                                cfg.scorer.fallback)
    else:
        scorer = LexicalScorer()
    brand = None
    if cfg.brand_judge is not None and cfg.brand_judge.kind == "llm":
        brand = LLMJudge(chat_backend(cfg.brand_judge))
    return Environment(organic=CachedProvider(organic), pages=pages, scorer=scorer, const=cfg.env,
                       brand_judge=brand)


def make_generator(cfg: RunConfig, instance: ExperimentInstance, tag: ConditionTag) -> PageGenerator:
    if tag.rewriter_label:
        path = Path(cfg.pagegeo_dir) / tag.rewriter_label / f"{instance.instance_id}.md"
        try:
            body = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise HarnessError(f"no rewritten page for {instance.instance_id} at {path}") from exc
        return RewrittenPageGenerator(body, tag.rewriter_label)
    if cfg.generator.kind == "llm":
        return LLMPageGenerator(chat_backend(cfg.generator))
    return TemplateGenerator()


def make_policy(cfg: RunConfig, instance: ExperimentInstance, graph: EvidenceGraph,
                backend: ChatBackend | None = None) -> AgentPolicy:
    kind = cfg.policy.kind
    if kind == "chat":
        return ChatPolicy(backend or chat_backend(cfg.policy), year=cfg.year, date=cfg.date,
                          char_budget=cfg.policy.char_budget)
    if kind == "greedy":
        return GreedyEvidencePolicy(graph.urls, instance.product)
    if kind == "rank5-crawler":
        return rank5_crawler(instance.product)
    if kind == "rank5-skipper":
        return rank5_skipper(instance.product)
    return immediate_answerer()


# -- layout ------------------------------------------------------------------

def condition_slug(tag: ConditionTag | str) -> str:
    return str(tag).replace(":", "-")


def dataset_name(cfg: RunConfig, instances: list[ExperimentInstance]) -> str:
    if cfg.dataset_name:
        return cfg.dataset_name
    sources = {i.source.value for i in instances}
    if len(sources) == 1:
        return sources.pop()
    return Path(cfg.dataset).stem


def ecosystem_dir(cfg: RunConfig, tag: ConditionTag, instance_id: str) -> Path:
    return Path(cfg.output_dir) / "ecosystems" / condition_slug(tag) / instance_id


def log_path(cfg: RunConfig, dataset: str, tag: ConditionTag, forced: bool) -> Path:
    name = condition_slug(tag) + (".forced" if forced else "") + ".jsonl"
    return Path(cfg.output_dir) / "logs" / dataset / name


def verdict_path(log: Path) -> Path:
    return log.with_suffix(".verdicts.jsonl")


def provenance(cfg: RunConfig) -> dict:
    """Config as recorded in artifact headers; the output location is not part of provenance."""
    data = cfg.to_dict()
    data.pop("output_dir", None)
    return {"config": data, "version": __version__}


def select_instances(instances: list[ExperimentInstance], ids: Iterable[str] | None = None,
                     limit: int | None = None) -> list[ExperimentInstance]:
    out = instances
    if ids:
        wanted = list(ids)
        by_id = {i.instance_id: i for i in instances}
        missing = [w for w in wanted if w not in by_id]
        if missing:
            raise ConfigError(f"unknown instance ids: {missing}")
        out = [by_id[w] for w in wanted]
    if limit is not None:
        out = out[:limit]
    return out


def graph_for(cfg: RunConfig, instance: ExperimentInstance, tag: ConditionTag) -> EvidenceGraph:
    """Reuse an exported ecosystem when present, otherwise build it deterministically."""
    exported = ecosystem_dir(cfg, tag, instance.instance_id)
    if (exported / "manifest.json").exists():
        graph = load_graph(exported)
        if graph.product == instance.product:
            return graph
        logger.warning("exported ecosystem %s does not match the dataset; rebuilding", exported)
    return build_ecosystem(instance.product, tag, make_generator(cfg, instance, tag), cfg.seed,
                           pages_per_role=cfg.generator.pages_per_role)


# -- build -------------------------------------------------------------------

def build_ecosystems(cfg: RunConfig, instances: list[ExperimentInstance]) -> tuple[list[Path], list[str]]:
    written, failures = [], []
    header = provenance(cfg)
    for cond in cfg.conditions:
        tag = ConditionTag.parse(cond)
        for inst in instances:
            try:
                graph = build_ecosystem(inst.product, tag, make_generator(cfg, inst, tag), cfg.seed,
                                        pages_per_role=cfg.generator.pages_per_role)
            except HarnessError as exc:
                detail = str(exc)
                for v in getattr(exc, "violations", None) or ():
                    detail += f"\n  {v.page_id}: [{v.rule}] {v.message}"
                failures.append(f"{inst.instance_id} ({tag}): {detail}")
                continue
            written.append(export_graph(graph, ecosystem_dir(cfg, tag, inst.instance_id), header=header))
    return written, failures


# -- logs --------------------------------------------------------------------

def _atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name, suffix=".tmp")
    with os.fdopen(fd, "w", encoding="utf-8") as fh:
        fh.write(text)
    os.replace(tmp, path)


def _append(path: Path, lines: list[str]) -> None:
    with path.open("a", encoding="utf-8") as fh:
        fh.write("".join(lines))
        fh.flush()
        os.fsync(fh.fileno())


def recover_log(path: Path) -> set[str]:
    """Episode ids fully present in ``path``. Torn tails and unfinished episodes are dropped."""
    if not path.exists():
        return set()
    kept: list[str] = []
    finished: set[str] = set()
    by_episode: dict[str, list[str]] = {}
    dirty = False
    for raw in path.read_text(encoding="utf-8").splitlines(keepends=True):
        try:
            rec = json.loads(raw)
        except ValueError:
            dirty = True
            continue
        if not raw.endswith("\n"):
            raw += "\n"
            dirty = True
        if rec.get("record_type") == "header":
            kept.append(raw)
            continue
        by_episode.setdefault(rec["episode_id"], []).append(raw)
        if rec.get("event_type") == "episode_end":
            finished.add(rec["episode_id"])
    for eid, lines in by_episode.items():
        if eid in finished:
            kept.extend(lines)
        else:
            dirty = True
    if dirty:
        logger.warning("repairing %s: dropped incomplete records", path)
        _atomic_write(path, "".join(kept))
    return finished


@dataclass
class EpisodeOutcome:
    episode_id: str
    trajectory: Trajectory | None = None
    verdict: Verdict | None = None
    error: str | None = None


@dataclass
class RunSummary:
    logs: list[Path] = field(default_factory=list)
    completed: int = 0
    skipped: int = 0
    failures: list[str] = field(default_factory=list)


def run_experiment(cfg: RunConfig, instances: list[ExperimentInstance], *,
                   clock: Callable[[], float] = time.time,
                   policy_factory: Callable[[ExperimentInstance, EvidenceGraph], AgentPolicy] | None = None,
                   stop_after: int | None = None) -> RunSummary:
    """Run every (condition, instance) episode not already logged.

    ``stop_after`` ends the run after that many new episodes (used to test resumption).
    """
    summary = RunSummary()
    env = make_environment(cfg)
    judge = make_judge(cfg)
    judge_meta = {"judge_model": getattr(judge, "model", "lexical"),
                  "prompt_version": getattr(judge, "prompt_version", "")}
    policy_backend = chat_backend(cfg.policy) if cfg.policy.kind == "chat" else None
    dataset = dataset_name(cfg, instances)
    budget = stop_after

    for cond in cfg.conditions:
        tag = ConditionTag.parse(cond)
        label = str(tag) + ("+forced" if cfg.forced_first_crawl else "")
        path = log_path(cfg, dataset, tag, cfg.forced_first_crawl)
        summary.logs.append(path)
        done = recover_log(path)
        if not path.exists() or path.stat().st_size == 0:
            header = {"record_type": "header", "dataset": dataset, "condition": str(tag),
                      "forced_first_crawl": cfg.forced_first_crawl, **judge_meta, **provenance(cfg)}
            _atomic_write(path, json.dumps(header, sort_keys=True) + "\n")
        vpath = verdict_path(path)

        pending = []
        for inst in instances:
            eid = episode_id_for(inst.instance_id, label, cfg.seed)
            if eid in done:
                summary.skipped += 1
            else:
                pending.append((eid, inst))
        if budget is not None:
            pending = pending[:budget]

        def one(item) -> EpisodeOutcome:
            eid, inst = item
            try:
                graph = graph_for(cfg, inst, tag)
                policy = (policy_factory(inst, graph) if policy_factory
                          else make_policy(cfg, inst, graph, policy_backend))
                forced = graph.entry.url if cfg.forced_first_crawl else None
                traj = run_episode(inst, graph, env, policy, cfg.budgets, cfg.seed, forced, episode_id=eid)
                if traj.termination == "PolicyError":
                    return EpisodeOutcome(eid, error=f"policy failed: {traj.error}")
                verdict = judge.judge_recommendation(traj.final_answer, inst.product) if traj.final_answer else None
                return EpisodeOutcome(eid, traj, verdict)
            except HarnessError as exc:
                return EpisodeOutcome(eid, error=f"{type(exc).__name__}: {exc}")

        workers = max(1, cfg.parallelism)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            for (eid, inst), out in zip(pending, pool.map(one, pending)):
                if out.error is not None:
                    logger.error("episode %s (%s, %s) failed: %s", eid, inst.instance_id, tag, out.error)
                    summary.failures.append(f"{inst.instance_id} ({tag}): {out.error}")
                    continue
                vrec = {"episode_id": eid, "instance_id": inst.instance_id, "condition": str(tag),
                        "recommendation": out.verdict.to_dict() if out.verdict else None, **judge_meta}
                _append(vpath, [json.dumps(vrec, sort_keys=True) + "\n"])
                _append(path, [json.dumps(r, sort_keys=True) + "\n" for r in out.trajectory.to_records(clock)])
                summary.completed += 1
        if budget is not None:
            budget -= len(pending)
            if budget <= 0:
                break
    return summary


# -- metrics -----------------------------------------------------------------

def read_header(path: Path) -> dict:
    with path.open(encoding="utf-8") as fh:
        first = fh.readline()
    try:
        rec = json.loads(first) if first.strip() else {}
    except ValueError:
        return {}
    return rec if rec.get("record_type") == "header" else {}


def metrics_for_log(path: Path, denominator_mode: str = "all") -> MetricsReport:
    header = read_header(path)
    trajectories = read_trajectories(path)
    verdicts = read_verdicts(verdict_path(path))
    signals = []
    for traj in trajectories:
        vrec = verdicts.get(traj.episode_id)
        verdict = None
        if traj.final_answer:
            if vrec is None or vrec.get("recommendation") is None:
                raise HarnessError(f"{path}: no recommendation verdict for episode {traj.episode_id}")
            verdict = Verdict.from_dict(vrec["recommendation"])
        signals.append(extract_signals(traj, None, verdict))
    condition = header.get("condition") or (trajectories[0].condition if trajectories else path.stem)
    if header.get("forced_first_crawl"):
        condition += "+forced"
    return aggregate(signals, condition=condition, dataset=header.get("dataset", ""),
                     judge_model=header.get("judge_model", ""), prompt_version=header.get("prompt_version", ""),
                     denominator_mode=denominator_mode)


def write_reports(reports: list[MetricsReport], out_dir: Path, header: dict) -> tuple[Path, Path]:
    out_dir.mkdir(parents=True, exist_ok=True)
    txt = out_dir / "metrics.txt"
    csv_path = out_dir / "metrics.csv"
    _atomic_write(txt, emit_report(reports, "aligned-text", header=header))
    _atomic_write(csv_path, emit_report(reports, "csv", header=header))
    return txt, csv_path


def load_dataset(cfg: RunConfig) -> list[ExperimentInstance]:
    if not cfg.dataset:
        raise ConfigError("dataset path is not set")
    return load_instances(cfg.dataset)
