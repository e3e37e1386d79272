"""Run configuration: one YAML file per run, dotted-key overrides from the command line."""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import yaml

from .agent import Budgets
from .ecosystem.model import ConditionTag
from .errors import ConfigError
from .searchenv import EnvConstants

PROVIDER_MODES = ("fixture", "synthetic", "live")
POLICY_KINDS = ("chat", "greedy", "rank5-crawler", "rank5-skipper", "immediate")
JUDGE_KINDS = ("lexical", "llm")
INTENT_KINDS = ("lexical", "fixture", "llm")
SCORER_KINDS = ("lexical", "remote")
GENERATOR_KINDS = ("template", "llm")


@dataclass
class ProviderConfig:
    mode: str = "synthetic"
    root: str | None = None  # fixture directory (queries/, pool.json, pages/)
    endpoint: str | None = None
    cache_dir: str | None = None


@dataclass
class ChatConfig:
    endpoint: str | None = None
    model: str = ""
    temperature: float = 0.0
    api_key_env: str = "OPENAI_API_KEY"
    cassette: str | None = None


@dataclass
class PolicyConfig(ChatConfig):
    kind: str = "greedy"
    char_budget: int = 60_000


@dataclass
class JudgeConfig(ChatConfig):
    kind: str = "lexical"


@dataclass
class IntentConfig(ChatConfig):
    kind: str = "lexical"
    verdicts: str | None = None  # JSONL of {query, keep} for the fixture judge


@dataclass
class ScorerConfig:
    kind: str = "lexical"
    endpoint: str | None = None
    token_env: str = "RERANKER_TOKEN"
    fallback: str = "fail"


@dataclass
class GeneratorConfig(ChatConfig):
    kind: str = "template"
    pages_per_role: int = 1


@dataclass
class RunConfig:
    dataset: str = ""
    dataset_name: str | None = None
    conditions: list[str] = field(default_factory=lambda: ["Trace"])
    budgets: Budgets = field(default_factory=Budgets)
    env: EnvConstants = field(default_factory=EnvConstants)
    provider: ProviderConfig = field(default_factory=ProviderConfig)
    policy: PolicyConfig = field(default_factory=PolicyConfig)
    judge: JudgeConfig = field(default_factory=JudgeConfig)
    brand_judge: JudgeConfig | None = None
    intent: IntentConfig = field(default_factory=IntentConfig)
    scorer: ScorerConfig = field(default_factory=ScorerConfig)
    generator: GeneratorConfig = field(default_factory=GeneratorConfig)
    pagegeo_dir: str | None = None
    forced_first_crawl: bool = False
    parallelism: int = 1
    seed: int = 0
    year: str = "2026"
    date: str = "2026-01-15"
    output_dir: str = "runs"
    denominator_mode: str = "all"

    def validate(self) -> "RunConfig":
        problems = []

        def check(ok: bool, msg: str):
            if not ok:
                problems.append(msg)

        check(self.provider.mode in PROVIDER_MODES, f"provider.mode must be one of {PROVIDER_MODES}")
        check(self.policy.kind in POLICY_KINDS, f"policy.kind must be one of {POLICY_KINDS}")
        check(self.judge.kind in JUDGE_KINDS, f"judge.kind must be one of {JUDGE_KINDS}")
        check(self.intent.kind in INTENT_KINDS, f"intent.kind must be one of {INTENT_KINDS}")
        check(self.scorer.kind in SCORER_KINDS, f"scorer.kind must be one of {SCORER_KINDS}")
        check(self.scorer.fallback in ("fail", "lexical"), "scorer.fallback must be fail or lexical")
        check(self.generator.kind in GENERATOR_KINDS, f"generator.kind must be one of {GENERATOR_KINDS}")
        check(self.generator.pages_per_role >= 1, "generator.pages_per_role must be positive")
        check(self.parallelism >= 1, "parallelism must be positive")
        check(self.denominator_mode in ("all", "conditioned"), "denominator_mode must be all or conditioned")
        check(bool(self.conditions), "conditions must not be empty")
        for c in self.conditions:
            try:
                tag = ConditionTag.parse(c)
            except ValueError as exc:
                problems.append(f"condition {c!r}: {exc}")
                continue
            if tag.rewriter_label and not self.pagegeo_dir:
                problems.append(f"condition {c!r} needs pagegeo_dir")
        for chat_name in ("policy", "judge", "intent"):
            cfg = getattr(self, chat_name)
            if cfg.kind in ("chat", "llm") and not (cfg.endpoint or cfg.cassette):
                problems.append(f"{chat_name} backend needs an endpoint or a cassette")
        if self.provider.mode == "fixture" and not self.provider.root:
            problems.append("provider.root is required in fixture mode")
        if self.provider.mode == "live" and not self.provider.endpoint:
            problems.append("provider.endpoint is required in live mode")
        if self.scorer.kind == "remote" and not self.scorer.endpoint:
            problems.append("scorer.endpoint is required for the remote scorer")
        if problems:
            raise ConfigError("; ".join(problems))
        return self

    def to_dict(self) -> dict[str, Any]:
        return dataclasses.asdict(self)


def _build(cls, data: Any, where: str):
    if dataclasses.is_dataclass(data):
        return data
    if not isinstance(data, dict):
        raise ConfigError(f"{where or 'config'}: expected a mapping, got {type(data).__name__}")
    names = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(names))
    if unknown:
        raise ConfigError(f"{where or 'config'}: unknown keys {unknown}")
    kwargs = {}
    for key, value in data.items():
        sub = _NESTED.get((cls, key))
        path = f"{where}.{key}" if where else key
        if sub is not None and value is not None:
            kwargs[key] = _build(sub, value, path)
        else:
            kwargs[key] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{where or 'config'}: {exc}") from exc


_NESTED = {
    (RunConfig, "budgets"): Budgets,
    (RunConfig, "env"): EnvConstants,
    (RunConfig, "provider"): ProviderConfig,
    (RunConfig, "policy"): PolicyConfig,
    (RunConfig, "judge"): JudgeConfig,
    (RunConfig, "brand_judge"): JudgeConfig,
    (RunConfig, "intent"): IntentConfig,
    (RunConfig, "scorer"): ScorerConfig,
    (RunConfig, "generator"): GeneratorConfig,
}


def apply_override(data: dict, assignment: str) -> None:
    """Apply ``a.b.c=value`` to a raw config mapping; the value is parsed as YAML."""
    key, sep, raw = assignment.partition("=")
    if not sep or not key.strip():
        raise ConfigError(f"override {assignment!r} is not key=value")
    parts = key.strip().split(".")
    node = data
    for part in parts[:-1]:
        child = node.get(part)
        if child is None:
            child = node[part] = {}
        if not isinstance(child, dict):
            raise ConfigError(f"override {assignment!r}: {part} is not a mapping")
        node = child
    node[parts[-1]] = yaml.safe_load(raw) if raw.strip() else ""


def load_config(path: str | Path | None = None, overrides: list[str] | tuple[str, ...] = ()) -> RunConfig:
    data: dict = {}
    if path is not None:
        p = Path(path)
        try:
            loaded = yaml.safe_load(p.read_text(encoding="utf-8"))
        except OSError as exc:
            raise ConfigError(f"cannot read config {p}: {exc}") from exc
        except yaml.YAMLError as exc:
            raise ConfigError(f"config {p} is not valid YAML: {exc}") from exc
        data = loaded or {}
        if not isinstance(data, dict):
            raise ConfigError(f"config {p} must be a mapping")
        base = p.parent
        for key in ("dataset", "pagegeo_dir", "output_dir"):
            if isinstance(data.get(key), str) and not Path(data[key]).is_absolute():
                data[key] = str(base / data[key])
        prov = data.get("provider")
        if isinstance(prov, dict):
            for key in ("root", "cache_dir"):
                if isinstance(prov.get(key), str) and not Path(prov[key]).is_absolute():
                    prov[key] = str(base / prov[key])
    for item in overrides:
        apply_override(data, item)
    return _build(RunConfig, data, "").validate()
