"""Query-conditioned snippets for synthetic pages.

Pipeline: clean Markdown/HTML -> split into paragraph passages -> parse the
query (strict grammar, lenient fallback) -> BM25 over passages -> best
word-boundary window of at most ``max_len`` characters, or the first
``max_len`` characters of the page when nothing matches.
"""

from __future__ import annotations

import html
import math
import re
from collections import Counter
from dataclasses import dataclass
from typing import Union

from .markdown import strip_links
from .textutil import tokenize

K1 = 1.2
B = 0.75
MAX_LEN = 150


@dataclass(frozen=True)
class CleanText:
    text: str
    source_page_id: str = ""

    @property
    def passages(self) -> list[str]:
        return [p for p in self.text.split("\n\n") if p]

    @property
    def flat(self) -> str:
        return " ".join(self.passages)


@dataclass(frozen=True)
class Snippet:
    text: str
    matched: bool


# -- cleaning ----------------------------------------------------------------

_BLOCK_TAGS = re.compile(r"</?(p|div|section|article|li|ul|ol|h[1-6]|table|tr|blockquote|header|footer)\b[^>]*>", re.I)
_LINE_RULES = [
    (re.compile(r"^\s*(```|~~~).*$"), ""),
    (re.compile(r"^\s{0,3}#{1,6}\s*(.*?)\s*#*\s*$"), r"\1"),
    (re.compile(r"^\s*(?:[-*_]\s*){3,}$"), ""),
    (re.compile(r"^\s*\|?\s*:?-{3,}:?\s*(\|\s*:?-{3,}:?\s*)*\|?\s*$"), ""),
    (re.compile(r"^\s*>+\s?"), ""),
    (re.compile(r"^\s*(?:[-*+]|\d+[.)])\s+"), ""),
]
_EMPHASIS = [
    re.compile(r"(\*\*|__)(.+?)\1"),
    re.compile(r"(?<![\w*])\*(?!\s)(.+?)(?<!\s)\*(?![\w*])"),
    re.compile(r"(?<![\w_])_(?!\s)(.+?)(?<!\s)_(?![\w_])"),
    re.compile(r"~~(.+?)~~"),
]


def clean_text(raw: str, page_id: str = "") -> CleanText:
    text = raw.replace("\r\n", "\n")
    text = re.sub(r"<!--.*?-->", " ", text, flags=re.S)
    text = re.sub(r"<(script|style)\b.*?</\1\s*>", " ", text, flags=re.S | re.I)
    text = strip_links(text)
    text = re.sub(r"<br\s*/?>", "\n", text, flags=re.I)
    text = _BLOCK_TAGS.sub("\n\n", text)
    text = re.sub(r"</?[A-Za-z][^<>]*>", "", text)
    text = html.unescape(text)

    lines = []
    for line in text.split("\n"):
        for pattern, repl in _LINE_RULES:
            line = pattern.sub(repl, line)
        if "|" in line:
            line = line.replace("|", " ")
        lines.append(line)
    text = "\n".join(lines)
    for pattern in _EMPHASIS[:1]:
        text = pattern.sub(r"\2", text)
    text = _EMPHASIS[1].sub(r"\1", text)
    text = _EMPHASIS[2].sub(r"\1", text)
    text = _EMPHASIS[3].sub(r"\1", text)
    text = text.replace("`", "")
    text = re.sub(r"[\[\]<>]", " ", text)

    paragraphs = [" ".join(block.split()) for block in re.split(r"\n\s*\n", text)]
    return CleanText("\n\n".join(p for p in paragraphs if p), page_id)


# -- query parsing -----------------------------------------------------------

class QueryParseError(ValueError):
    pass


@dataclass(frozen=True)
class Term:
    token: str


@dataclass(frozen=True)
class Phrase:
    tokens: tuple[str, ...]


@dataclass(frozen=True)
class And:
    children: tuple["Node", ...]


@dataclass(frozen=True)
class Or:
    children: tuple["Node", ...]


Node = Union[Term, Phrase, And, Or]

_SPECIAL = set(':^~*{}[]\\!')
_LEX_RE = re.compile(r'"[^"]*"|\(|\)|[^\s()"]+|"')


def _lex(query: str) -> list[tuple[str, str]]:
    out = []
    for m in _LEX_RE.finditer(query):
        tok = m.group(0)
        if tok == '"':
            raise QueryParseError("unbalanced quote")
        if tok.startswith('"'):
            out.append(("PHRASE", tok[1:-1]))
        elif tok in ("(", ")"):
            out.append((tok, tok))
        elif tok in ("AND", "OR"):
            out.append((tok, tok))
        else:
            if _SPECIAL & set(tok):
                raise QueryParseError(f"unsupported syntax in {tok!r}")
            out.append(("WORD", tok))
    return out


def _leaf(kind: str, value: str) -> list[Node]:
    toks = tokenize(value)
    if kind == "PHRASE":
        if not toks:
            raise QueryParseError("empty phrase")
        return [Phrase(tuple(toks)) if len(toks) > 1 else Term(toks[0])]
    return [Term(t) for t in toks]


def parse_strict(query: str) -> Node | None:
    """Phrases in double quotes, upper-case AND / OR, parentheses; adjacency means OR.

    Returns None when the query carries no searchable terms.
    """
    tokens = _lex(query)
    pos = 0

    def peek():
        return tokens[pos][0] if pos < len(tokens) else None

    def parse_or() -> list[Node]:
        nonlocal pos
        items = parse_and()
        while True:
            kind = peek()
            if kind == "OR":
                pos += 1
                if peek() in (None, ")", "AND", "OR"):
                    raise QueryParseError("OR without right operand")
                items += parse_and()
            elif kind in ("WORD", "PHRASE", "("):
                items += parse_and()
            else:
                return items

    def parse_and() -> list[Node]:
        nonlocal pos
        left = parse_unary()
        group = [left] if left else []
        while peek() == "AND":
            pos += 1
            if peek() in (None, ")", "AND", "OR"):
                raise QueryParseError("AND without right operand")
            right = parse_unary()
            if right:
                group.append(right)
        if len(group) > 1:
            return [And(tuple(group))]
        return group

    def parse_unary() -> Node | None:
        nonlocal pos
        kind = peek()
        if kind is None:
            raise QueryParseError("unexpected end of query")
        if kind in ("AND", "OR"):
            raise QueryParseError(f"dangling {kind}")
        if kind == ")":
            raise QueryParseError("unbalanced parenthesis")
        if kind == "(":
            pos += 1
            if peek() == ")":
                raise QueryParseError("empty group")
            inner = parse_or()
            if peek() != ")":
                raise QueryParseError("unbalanced parenthesis")
            pos += 1
            return _group(inner)
        value = tokens[pos][1]
        pos += 1
        return _group(_leaf(kind, value))

    if not tokens:
        return None
    items = parse_or()
    if pos != len(tokens):
        raise QueryParseError("unbalanced parenthesis")
    return _group(items)


def _group(items: list[Node]) -> Node | None:
    items = [i for i in items if i is not None]
    if not items:
        return None
    if len(items) == 1:
        return items[0]
    flat: list[Node] = []
    for i in items:
        for child in i.children if isinstance(i, Or) else (i,):
            if child not in flat:  # repeated terms add no weight
                flat.append(child)
    return flat[0] if len(flat) == 1 else Or(tuple(flat))


def parse_lenient(query: str) -> Node | None:
    """Drop operators and syntax; every remaining token becomes an optional term."""
    words = [w for w in query.split() if w not in ("AND", "OR")]
    terms = [Term(t) for w in words for t in tokenize(w)]
    return _group(terms)


def query_terms(node: Node | None) -> set[str]:
    if node is None:
        return set()
    if isinstance(node, Term):
        return {node.token}
    if isinstance(node, Phrase):
        return set(node.tokens)
    out: set[str] = set()
    for c in node.children:
        out |= query_terms(c)
    return out


def has_operators(query: str) -> bool:
    return bool(re.search(r'["()]|\bAND\b|\bOR\b', query)) or bool(_SPECIAL & set(query))


# -- scoring -----------------------------------------------------------------

class PassageIndex:
    """In-memory BM25 index whose documents are the passages of one page."""

    def __init__(self, passages: list[str], k1: float = K1, b: float = B):
        self.passages = passages
        self.k1, self.b = k1, b
        self.tokens = [tokenize(p) for p in passages]
        self.tf = [Counter(t) for t in self.tokens]
        self.n = len(passages)
        self.avgdl = (sum(len(t) for t in self.tokens) / self.n) if self.n else 0.0
        self.df: Counter = Counter()
        for c in self.tf:
            self.df.update(c.keys())

    def idf(self, token: str, df: int | None = None) -> float:
        df = self.df.get(token, 0) if df is None else df
        return math.log(1.0 + (self.n - df + 0.5) / (df + 0.5))

    def _tfnorm(self, tf: float, i: int) -> float:
        dl = len(self.tokens[i])
        norm = 1.0 - self.b + self.b * (dl / self.avgdl if self.avgdl else 0.0)
        return tf * (self.k1 + 1.0) / (tf + self.k1 * norm)

    def _phrase_count(self, tokens: tuple[str, ...], i: int) -> int:
        toks = self.tokens[i]
        n = len(tokens)
        return sum(1 for s in range(len(toks) - n + 1) if tuple(toks[s : s + n]) == tokens)

    def evaluate(self, node: Node, i: int) -> tuple[bool, float]:
        if isinstance(node, Term):
            tf = self.tf[i].get(node.token, 0)
            return (True, self.idf(node.token) * self._tfnorm(tf, i)) if tf else (False, 0.0)
        if isinstance(node, Phrase):
            pf = self._phrase_count(node.tokens, i)
            if not pf:
                return False, 0.0
            return True, sum(self.idf(t) for t in node.tokens) * self._tfnorm(pf, i)
        results = [self.evaluate(c, i) for c in node.children]
        if isinstance(node, And):
            if all(m for m, _ in results):
                return True, sum(s for _, s in results)
            return False, 0.0
        matched = [s for m, s in results if m]
        return (True, sum(matched)) if matched else (False, 0.0)

    def best(self, node: Node) -> tuple[int, float]:
        """Index and score of the highest-scoring passage; earliest wins ties. (-1, 0) if none."""
        best_i, best_s = -1, 0.0
        for i in range(self.n):
            matched, score = self.evaluate(node, i)
            if matched and score > best_s:
                best_i, best_s = i, score
        return best_i, best_s


# -- windows -----------------------------------------------------------------

def _prefix(words: list[str], start: int, max_len: int) -> str:
    if len(words[start]) > max_len:
        return words[start][:max_len]
    out, size = [], 0
    for w in words[start:]:
        extra = len(w) + (1 if out else 0)
        if size + extra > max_len:
            break
        out.append(w)
        size += extra
    return " ".join(out)


def best_window(passage: str, terms: set[str], max_len: int = MAX_LEN) -> str:
    words = passage.split(" ")
    hits = [1 if terms & set(tokenize(w)) else 0 for w in words]
    best_text, best_count = None, -1
    for start in range(len(words)):
        text = _prefix(words, start, max_len)
        n_words = len(text.split(" ")) if len(words[start]) <= max_len else 1
        count = sum(hits[start : start + n_words])
        if count > best_count:
            best_text, best_count = text, count
    return best_text or ""


def extract_snippet(clean: CleanText, query: str, max_len: int = MAX_LEN) -> Snippet:
    passages = clean.passages
    node: Node | None
    strict = True
    try:
        node = parse_strict(query)
    except QueryParseError:
        node, strict = parse_lenient(query), False

    if node is not None and passages:
        index = PassageIndex(passages)
        i, score = index.best(node)
        if score <= 0 and strict:
            # strict boolean structure matched nothing: retry as a bag of words
            node = parse_lenient(query)
            if node is not None:
                i, score = index.best(node)
        if score > 0:
            return Snippet(best_window(passages[i], query_terms(node), max_len), True)

    flat = clean.flat
    if not flat:
        return Snippet("", False)
    return Snippet(_prefix(flat.split(" "), 0, max_len), False)


def snippet_for(markdown: str, query: str, page_id: str = "", max_len: int = MAX_LEN) -> Snippet:
    return extract_snippet(clean_text(markdown, page_id), query, max_len)
