"""Benchmark instances: loading, and the intent filter applied to raw query pools."""

from __future__ import annotations

import enum
import json
import logging
import re
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Protocol, Sequence

from . import prompts
from .errors import HarnessError, ProtocolError, RecordParseError, ValidationError
from .llm import ChatBackend
from .textutil import normalize_ws, tokenize

logger = logging.getLogger(__name__)


class Source(str, enum.Enum):
    SAFESEARCH = "SafeSearch"
    ECOMMERCE = "ECommerce"
    EGEO = "EGEO"
    CUSTOM = "Custom"

    @classmethod
    def parse(cls, value: str) -> "Source":
        key = re.sub(r"[^a-z]", "", str(value).lower())
        for member in cls:
            if member.value.lower() == key:
                return member
        raise ValueError(f"unknown source {value!r}")


@dataclass(frozen=True)
class ProductProfile:
    name: str
    description: str
    attributes: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        name = normalize_ws(self.name)
        if not name:
            raise ValueError("product name is empty")
        if not self.description.strip():
            raise ValueError("product description is empty")
        object.__setattr__(self, "name", name)
        attrs = tuple((str(k), str(v)) for k, v in self.attributes)
        keys = [k for k, _ in attrs]
        if len(set(keys)) != len(keys):
            raise ValueError(f"duplicate attribute keys in profile {name!r}")
        object.__setattr__(self, "attributes", attrs)

    def attribute(self, key: str, default: str | None = None) -> str | None:
        for k, v in self.attributes:
            if k == key:
                return v
        return default

    @property
    def category(self) -> str:
        return self.attribute("category") or "products"

    def to_dict(self) -> dict:
        return {"name": self.name, "description": self.description, "attributes": [list(a) for a in self.attributes]}


@dataclass(frozen=True)
class ExperimentInstance:
    instance_id: str
    source: Source
    query: str
    product: ProductProfile

    def __post_init__(self):
        if not self.query.strip():
            raise ValueError("query is empty")

    def to_record(self) -> dict:
        return {
            "instance_id": self.instance_id,
            "source": self.source.value,
            "query": self.query,
            "product_name": self.product.name,
            "product_desc": self.product.description,
            "attributes": dict(self.product.attributes),
        }


def _parse_attributes(raw) -> tuple[tuple[str, str], ...]:
    if raw is None:
        return ()
    if isinstance(raw, dict):
        return tuple((str(k), str(v)) for k, v in raw.items())
    if isinstance(raw, list):
        out = []
        for item in raw:
            if isinstance(item, dict) and "key" in item:
                out.append((str(item["key"]), str(item.get("value", ""))))
            elif isinstance(item, (list, tuple)) and len(item) == 2:
                out.append((str(item[0]), str(item[1])))
            else:
                raise ValueError(f"bad attribute entry {item!r}")
        return tuple(out)
    raise ValueError("attributes must be an object or a list of pairs")


def parse_record(record: dict, index: int) -> ExperimentInstance:
    for key in ("source", "query", "product_name", "product_desc"):
        if key not in record:
            raise ValueError(f"missing field {key!r}")
    source = Source.parse(record["source"])
    product = ProductProfile(
        name=str(record["product_name"]),
        description=str(record["product_desc"]),
        attributes=_parse_attributes(record.get("attributes")),
    )
    instance_id = record.get("instance_id") or f"{source.value.lower()}-{index:04d}"
    return ExperimentInstance(str(instance_id), source, str(record["query"]), product)


def load_instances(path: str | Path) -> list[ExperimentInstance]:
    """Read one JSON record per line. Blank lines are skipped; ids are assigned if absent."""
    path = Path(path)
    instances: list[ExperimentInstance] = []
    seen: set[str] = set()
    with path.open(encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            if not line.strip():
                continue
            try:
                record = json.loads(line)
                if not isinstance(record, dict):
                    raise ValueError("record is not an object")
                inst = parse_record(record, len(instances) + 1)
            except (ValueError, json.JSONDecodeError) as exc:
                raise RecordParseError(str(exc), line=lineno, path=str(path)) from exc
            if inst.instance_id in seen:
                raise ValidationError(f"{path}:{lineno}: duplicate instance_id {inst.instance_id!r}")
            seen.add(inst.instance_id)
            instances.append(inst)
    return instances


def write_instances(path: str | Path, instances: Iterable[ExperimentInstance]) -> None:
    with Path(path).open("w", encoding="utf-8") as fh:
        for inst in instances:
            fh.write(json.dumps(inst.to_record(), ensure_ascii=False) + "\n")


# -- intent filter -----------------------------------------------------------

class IntentJudge(Protocol):
    def is_recommendation_query(self, query: str) -> bool: ...


def parse_bool_reply(text: str | None) -> bool | None:
    if text is None:
        return None
    cleaned = text.strip().strip("`*\"'.").strip()
    if cleaned == "True":
        return True
    if cleaned == "False":
        return False
    return None


class LLMIntentJudge:
    """Sends the query-filter prompt as the system message and the query as the user turn."""

    prompt_version = prompts.version_tag("query_filter")

    def __init__(self, backend: ChatBackend):
        self.backend = backend
        self.prompt = prompts.load("query_filter")

    def is_recommendation_query(self, query: str) -> bool:
        messages = [
            {"role": "system", "content": self.prompt},
            {"role": "user", "content": query},
        ]
        reply = self.backend.complete(messages).get("content")
        verdict = parse_bool_reply(reply)
        if verdict is None:
            messages += [
                {"role": "assistant", "content": reply or ""},
                {"role": "user", "content": "Return only True or False."},
            ]
            reply = self.backend.complete(messages).get("content")
            verdict = parse_bool_reply(reply)
        if verdict is None:
            raise ProtocolError(f"query filter judge gave a non-boolean reply: {reply!r}")
        return verdict


class FixtureIntentJudge:
    """Replays frozen verdicts keyed by the exact query string."""

    def __init__(self, verdicts: dict[str, bool]):
        self.verdicts = dict(verdicts)

    @classmethod
    def from_file(cls, path: str | Path) -> "FixtureIntentJudge":
        verdicts = {}
        with Path(path).open(encoding="utf-8") as fh:
            for line in fh:
                if line.strip():
                    rec = json.loads(line)
                    verdicts[rec["query"]] = bool(rec["keep"])
        return cls(verdicts)

    def is_recommendation_query(self, query: str) -> bool:
        try:
            return self.verdicts[query]
        except KeyError:
            raise HarnessError(f"no frozen verdict for query {query!r}") from None


_REC_CUES = {
    "best", "top", "recommend", "recommendation", "recommendations", "recommended", "good",
    "great", "suggest", "suggestions", "which", "ideal", "affordable", "cheap", "budget",
    "looking", "need", "want", "buy", "buying", "for", "under", "options", "choose",
}
_COMPONENT_WORDS = {
    "ingredient", "ingredients", "supplement", "supplements", "vitamin", "vitamins", "therapy",
    "therapies", "biologic", "biologics", "compound", "compounds", "peptide", "peptides",
    "extract", "extracts", "mineral", "minerals", "probiotic", "probiotics", "enzyme", "enzymes",
}
_METHOD_PATTERNS = re.compile(
    r"\b(how to|how do i|how can i|ways to|methods?|treatments?|remed(y|ies)|strateg(y|ies)"
    r"|approach(es)?|techniques?|tips)\b"
)
_SITE_OR_DATE = re.compile(
    r"(\bsite:|\b[a-z0-9-]+\.(com|org|net|co|io|uk|de)\b|\bon (amazon|reddit|ebay|walmart|etsy)\b"
    r"|\b(in|from|since|before|after|during) (19|20)\d{2}\b|\b(yesterday|today|last week|this week)\b"
    r"|\b(january|february|march|april|may|june|july|august|september|october|november|december) (19|20)\d{2}\b)"
)
_COMPARE = re.compile(r"\b(vs\.?|versus|compared to|or)\b|\bshould i (buy|get)\b|\bworth (it|buying)\b")
_KNOWN_BRANDS = {
    "apple", "samsung", "sony", "bose", "nike", "adidas", "dyson", "lg", "dell", "hp", "lenovo",
    "asus", "acer", "google", "microsoft", "canon", "nikon", "garmin", "fitbit", "xiaomi",
    "iphone", "ipad", "macbook", "airpods", "galaxy", "pixel", "kindle", "playstation", "xbox",
}
_COMMON_CAPS = {"i", "best", "top", "what", "which", "good", "looking", "need", "recommend"}


def _named_entities(query: str) -> list[str]:
    """Capitalized or model-number-like words that look like product or brand names."""
    words = re.findall(r"[A-Za-z0-9][A-Za-z0-9'&+-]*", query)
    found = []
    for i, w in enumerate(words):
        lw = w.lower()
        if lw in _KNOWN_BRANDS:
            found.append(w)
        elif re.search(r"[A-Za-z]", w) and re.search(r"\d", w) and not re.fullmatch(r"\d+(s|k|gb|tb|mah|w|mm|in|ft|lb|lbs|oz)?", lw):
            found.append(w)
        elif i > 0 and w[0].isupper() and not w.isupper() and lw not in _COMMON_CAPS:
            found.append(w)
        elif re.search(r"[a-z][A-Z]", w):
            found.append(w)
    return found


class LexicalIntentJudge:
    """Keyword heuristics approximating the six rejection rules. Offline tests only."""

    def explain(self, query: str) -> tuple[bool, str]:
        q = normalize_ws(query)
        low = q.lower()
        toks = tokenize(q)
        if not toks:
            return False, "rule1: empty"
        named = _named_entities(q)
        if _COMPARE.search(low) and len(named) >= 1:
            return False, "rule6: compares specific named products"
        if named:
            return False, "rule5: names specific products or brands"
        if _SITE_OR_DATE.search(low):
            return False, "rule2: restricted to dates or websites"
        if set(toks) & _COMPONENT_WORDS:
            return False, "rule3: asks for components rather than products"
        if _METHOD_PATTERNS.search(low):
            return False, "rule4: asks for methods or treatments"
        if len(toks) < 3 or not (set(toks) & _REC_CUES):
            return False, "rule1: bare keyword or no recommendation intent"
        return True, "open-ended recommendation intent"

    def is_recommendation_query(self, query: str) -> bool:
        return self.explain(query)[0]


def filter_query(query: str, judge: IntentJudge) -> bool:
    if not query or not query.strip():
        return False
    return bool(judge.is_recommendation_query(query))


class FilterError(HarnessError):
    def __init__(self, index: int, cause: Exception):
        self.index = index
        self.cause = cause
        super().__init__(f"query #{index} failed: {cause}")


def filter_dataset(
    queries: Sequence[str], judge: IntentJudge, *, max_workers: int = 1
) -> tuple[list[str], list[str]]:
    """Partition queries into (retained, rejected), each in input order."""

    def one(item):
        idx, q = item
        try:
            return filter_query(q, judge)
        except HarnessError as exc:
            raise FilterError(idx, exc) from exc

    items = list(enumerate(queries))
    if max_workers > 1:
        with ThreadPoolExecutor(max_workers=max_workers) as pool:
            keep = list(pool.map(one, items))
    else:
        keep = [one(it) for it in items]
    retained = [q for q, k in zip(queries, keep) if k]
    rejected = [q for q, k in zip(queries, keep) if not k]
    logger.info("filter: retained %d, rejected %d", len(retained), len(rejected))
    return retained, rejected
