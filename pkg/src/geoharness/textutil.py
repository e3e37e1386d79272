"""Small text helpers shared across modules (tokenizing, name matching, slugs)."""

from __future__ import annotations

import re
import unicodedata

_TOKEN_RE = re.compile(r"[a-z0-9]+")


def ascii_fold(text: str) -> str:
    decomposed = unicodedata.normalize("NFKD", text)
    return "".join(ch for ch in decomposed if not unicodedata.combining(ch))


def tokenize(text: str) -> list[str]:
    """Lowercase, ASCII-fold and split on anything that is not a letter or digit."""
    return _TOKEN_RE.findall(ascii_fold(text).lower())


def normalize_ws(text: str) -> str:
    return " ".join(text.split())


def contains_sequence(haystack: list[str], needle: list[str]) -> bool:
    if not needle or len(needle) > len(haystack):
        return False
    n = len(needle)
    return any(haystack[i : i + n] == needle for i in range(len(haystack) - n + 1))


def mentions_name(text: str, name: str) -> bool:
    """True when the normalized token sequence of `name` occurs contiguously in `text`."""
    return contains_sequence(tokenize(text), tokenize(name))


def slugify(text: str) -> str:
    return "-".join(tokenize(text)) or "item"


def split_sentences(text: str) -> list[str]:
    parts = re.split(r"(?<=[.!?])\s+|\n+", text)
    return [p.strip() for p in parts if p.strip()]
