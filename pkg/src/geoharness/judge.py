"""Answer-level and query-level verdicts, LLM-backed or lexical."""

from __future__ import annotations

import enum
import re
from dataclasses import dataclass
from typing import Protocol

from . import prompts
from .dataset import ProductProfile, parse_bool_reply
from .errors import ProtocolError
from .llm import ChatBackend
from .markdown import strip_links
from .textutil import mentions_name, split_sentences, tokenize


class VerdictSource(str, enum.Enum):
    LLM = "LLM"
    LEXICAL = "Lexical"


@dataclass(frozen=True)
class Verdict:
    value: bool
    source: VerdictSource
    rationale: str | None = None

    def to_dict(self) -> dict:
        return {"value": self.value, "source": self.source.value, "rationale": self.rationale}

    @classmethod
    def from_dict(cls, d: dict) -> "Verdict":
        return cls(bool(d["value"]), VerdictSource(d["source"]), d.get("rationale"))


class Judge(Protocol):
    model: str
    prompt_version: str

    def judge_recommendation(self, answer: str, product: ProductProfile) -> Verdict: ...

    def judge_brand_relevance(self, query: str, product: ProductProfile) -> Verdict: ...


RECOMMEND_CUES = (
    "recommend", "recommended", "top pick", "best pick", "best choice", "best option", "worth",
    "consider", "suitable", "good option", "great option", "solid choice", "strong choice",
    "go with", "stands out", "excellent", "good fit", "great fit", "shortlist", "worth buying",
    "a solid", "a strong", "is ideal", "top choice",
)
NEGATIVE_CUES = (
    "avoid", "skip", "not recommend", "don't recommend", "do not recommend", "cannot recommend",
    "can't recommend", "wouldn't", "would not", "not worth", "steer clear", "insufficient evidence",
    "could not verify", "couldn't verify", "no independent", "unverified", "not suitable",
)
_BROAD = re.compile(r"^\s*(best|top|cheapest|good|recommended)\b|\b(alternatives?|other|vs other|compared to other|like)\b")


_URL_RE = re.compile(r"https?://\S+")


def _visible(text: str) -> str:
    """Answer text without link targets, so a url slug never counts as a name mention."""
    return _URL_RE.sub(" ", strip_links(text))


def _has_cue(sentence: str, cues) -> bool:
    low = " ".join(tokenize(sentence))
    return any(re.search(rf"\b{re.escape(' '.join(tokenize(c)))}\b", low) for c in cues)


class LexicalJudge:
    model = "lexical"
    prompt_version = "lexical.v1"

    def __init__(self, recommend_cues=RECOMMEND_CUES, negative_cues=NEGATIVE_CUES):
        self.recommend_cues = tuple(recommend_cues)
        self.negative_cues = tuple(negative_cues)

    def judge_recommendation(self, answer: str, product: ProductProfile) -> Verdict:
        answer = _visible(answer or "")
        if not answer or not mentions_name(answer, product.name):
            return Verdict(False, VerdictSource.LEXICAL, "product not mentioned")
        for sentence in split_sentences(answer):
            if not mentions_name(sentence, product.name):
                continue
            if _has_cue(sentence, self.negative_cues):
                continue
            if _has_cue(sentence, self.recommend_cues):
                return Verdict(True, VerdictSource.LEXICAL, f"cue in: {sentence[:80]}")
        return Verdict(False, VerdictSource.LEXICAL, "mentioned without a recommendation cue")

    def judge_brand_relevance(self, query: str, product: ProductProfile) -> Verdict:
        if not mentions_name(query, product.name):
            return Verdict(False, VerdictSource.LEXICAL, "product not named")
        if _BROAD.search(query.lower()):
            return Verdict(False, VerdictSource.LEXICAL, "category-level phrasing")
        return Verdict(True, VerdictSource.LEXICAL, "names the product")


class LLMJudge:
    """Asks a chat model for a one-word True/False verdict; one re-ask on anything else."""

    def __init__(self, backend: ChatBackend, *, version: int = 1):
        self.backend = backend
        self.model = backend.model
        self.prompt_version = f"judges.v{version}"
        self._rec = prompts.load("recommendation_judge", version)
        self._brand = prompts.load("brand_relevance_judge", version)

    def _ask(self, prompt: str) -> tuple[bool, str]:
        messages = [{"role": "user", "content": prompt}]
        reply = self.backend.complete(messages).get("content")
        value = parse_bool_reply(reply)
        if value is None:
            messages += [{"role": "assistant", "content": reply or ""},
                         {"role": "user", "content": "Answer with exactly one word: True or False."}]
            reply = self.backend.complete(messages).get("content")
            value = parse_bool_reply(reply)
        if value is None:
            raise ProtocolError(f"judge reply is not True/False: {reply!r}")
        return value, (reply or "").strip()

    def judge_recommendation(self, answer: str, product: ProductProfile) -> Verdict:
        if not answer.strip():
            raise ValueError("empty answer")
        prompt = self._rec.format(name=product.name, description=product.description, answer=answer)
        value, raw = self._ask(prompt)
        return Verdict(value, VerdictSource.LLM, raw)

    def judge_brand_relevance(self, query: str, product: ProductProfile) -> Verdict:
        if not query.strip():
            raise ValueError("empty query")
        value, raw = self._ask(self._brand.format(name=product.name, query=query))
        return Verdict(value, VerdictSource.LLM, raw)
